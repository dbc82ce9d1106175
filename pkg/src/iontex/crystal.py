"""Rotating-frame ion-crystal lattice: a triangular lattice clipped to a disk.

Positions are stored as polar coordinates (r_j, phi_j) in the co-rotating
frame, in micrometres and radians. The crystal radius R is the radius of the
outermost ion, so the normalized radius r_tilde = r / R reaches 1 on the
outer shell.
"""

import json

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParameterError, ParseError

_TWO_PI = 2.0 * np.pi


class IonCrystal:
    """Immutable set of ion positions on a disk.

    Parameters
    ----------
    r, phi : ndarray
        Polar coordinates per ion (um, rad). phi is reduced mod 2*pi.
    radius : float
        Crystal radius R in um. Must satisfy r <= R for every ion.
    spacing : float
        Nominal lattice constant in um (construction parameter).
    """

    def __init__(self, r, phi, radius, spacing):
        r = np.ascontiguousarray(r, dtype=float)
        phi = np.mod(np.ascontiguousarray(phi, dtype=float), _TWO_PI)
        if r.ndim != 1 or phi.shape != r.shape:
            raise InvalidParameterError("r and phi must be 1D arrays of equal length")
        if r.size == 0:
            raise InvalidParameterError("crystal must contain at least one ion")
        if radius <= 0:
            raise InvalidParameterError(f"crystal radius must be positive, got {radius}")
        if spacing <= 0:
            raise InvalidParameterError(f"lattice spacing must be positive, got {spacing}")
        if np.any(r < 0):
            raise InvalidParameterError("radial coordinates must be non-negative")
        if np.any(r > radius * (1 + 1e-12) + 1e-12):
            raise InvalidParameterError("ion outside the stated crystal radius")
        r.flags.writeable = False
        phi.flags.writeable = False
        self.r = r
        self.phi = phi
        self.R = float(radius)
        self.spacing = float(spacing)

    @property
    def n_ions(self):
        return self.r.size

    @property
    def r_tilde(self):
        """Normalized radii r / R in [0, 1]."""
        return self.r / self.R

    @property
    def xy(self):
        """Cartesian positions, shape (N, 2), in um."""
        return np.column_stack((self.r * np.cos(self.phi), self.r * np.sin(self.phi)))

    def min_pair_distance(self):
        """Smallest pairwise Euclidean distance (um); inf for a single ion."""
        if self.n_ions < 2:
            return np.inf
        d, _ = cKDTree(self.xy).query(self.xy, k=2)
        return float(d[:, 1].min())

    def __eq__(self, other):
        if not isinstance(other, IonCrystal):
            return NotImplemented
        return (
            self.R == other.R
            and self.spacing == other.spacing
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.phi, other.phi)
        )

    def __repr__(self):
        return f"IonCrystal(n_ions={self.n_ions}, R={self.R:g} um, spacing={self.spacing:g} um)"

    def to_json_dict(self):
        return {
            "version": 1,
            "R_um": self.R,
            "spacing_um": self.spacing,
            "ions": [
                {"id": int(i), "r_um": float(self.r[i]), "phi_rad": float(self.phi[i])}
                for i in range(self.n_ions)
            ],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, d):
        try:
            ions = d["ions"]
            r = np.array([ion["r_um"] for ion in ions], dtype=float)
            phi = np.array([ion["phi_rad"] for ion in ions], dtype=float)
            return cls(r, phi, float(d["R_um"]), float(d["spacing_um"]))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed crystal record: missing {exc}") from exc

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_json_dict(d)


def _hex_lattice_points(spacing, radius):
    """All triangular-lattice sites within the closed disk, origin included."""
    n_max = int(np.ceil(radius / spacing * 2.0 / np.sqrt(3.0))) + 2
    i, j = np.meshgrid(np.arange(-n_max, n_max + 1), np.arange(-n_max, n_max + 1))
    x = spacing * (i + 0.5 * j).ravel()
    y = spacing * (np.sqrt(3.0) / 2.0 * j).ravel()
    keep = x * x + y * y <= (radius + 1e-9) ** 2
    return x[keep], y[keep]


def generate_crystal(spacing, radius, jitter=0.0, seed=None):
    """Build a triangular lattice clipped to a disk of the given radius.

    One site sits at the origin. Ions are sorted by (r, phi) so the output is
    deterministic for identical inputs. R is set to the largest occupied
    radius, or to ``radius`` when the origin is the only site. Optional
    positional jitter (uniform in a disk of radius ``jitter`` um, seeded)
    emulates shot-to-shot configuration changes; default off.

    Parameters
    ----------
    spacing, radius : float
        Lattice constant and clip radius in um, both > 0.
    jitter : float
        Per-site displacement disk radius in um.
    seed : int or None
        Seeds the jitter draw; ignored when jitter == 0.

    Returns
    -------
    IonCrystal
    """
    if spacing <= 0:
        raise InvalidParameterError(f"spacing must be positive, got {spacing}")
    if radius <= 0:
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    if jitter < 0:
        raise InvalidParameterError(f"jitter must be non-negative, got {jitter}")

    x, y = _hex_lattice_points(spacing, radius)
    if jitter > 0:
        rng = np.random.default_rng(seed)
        rho = jitter * np.sqrt(rng.random(x.size))
        ang = _TWO_PI * rng.random(x.size)
        x = x + rho * np.cos(ang)
        y = y + rho * np.sin(ang)

    r = np.hypot(x, y)
    phi = np.mod(np.arctan2(y, x), _TWO_PI)
    order = np.lexsort((phi, r))
    r, phi = r[order], phi[order]

    R = r.max() if r.max() > 0 else float(radius)
    crystal = IonCrystal(r, phi, R, spacing)
    min_dist = crystal.min_pair_distance()
    if min_dist < 0.99 * spacing - 2.0 * jitter:
        raise InvalidParameterError(
            f"lattice construction violated minimum spacing: {min_dist:.6g} um"
        )
    return crystal
