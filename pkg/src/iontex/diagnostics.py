"""Scalar characterisations of spin textures.

Winding number by Delaunay-triangulated solid angles, the chiral order
parameter, mean single-site fidelity, and the two nonlinear fits (edge-rate
recovery from winding time traces, error-function edge width).
"""

import json
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import curve_fit
from scipy.spatial import Delaunay, QhullError
from scipy.special import erf

from . import kernels
from .errors import (
    DegenerateSpinError,
    FitError,
    InvalidParameterError,
    TriangulationError,
)

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

# 10-90% width of an erf edge in units of its Gaussian sigma.
EDGE_WIDTH_PER_SIGMA = 2.5631031310892007


def winding_continuum(theta_edge):
    """Winding number of the radially symmetric drive texture.

    For edge rotation angle theta_edge = omega_R * t the texture covers the
    polar range [0, theta_edge]; with the core-down orientation the charge is
    -(1 - cos(theta_edge)) / 2.
    """
    theta = np.asarray(theta_edge, dtype=float)
    if np.any(theta < 0):
        raise InvalidParameterError("theta_edge must be non-negative")
    q = -(1.0 - np.cos(theta)) / 2.0
    return float(q) if q.ndim == 0 else q


def _tie_break_positions(xy, spacing, tie_seed=0):
    """Deterministic sub-nanometre nudge keyed to ion index.

    Breaks cocircular Delaunay ties without moving any point far enough to
    change a non-degenerate triangulation.
    """
    n = xy.shape[0]
    ang = _GOLDEN_ANGLE * (np.arange(n) + 1 + tie_seed)
    eps = 1e-6 * spacing
    return xy + eps * np.column_stack((np.cos(ang), np.sin(ang)))


def triangulate_ccw(xy, spacing, tie_seed=0):
    """Delaunay triangle vertex indices, oriented counterclockwise."""
    if xy.shape[0] < 3:
        raise TriangulationError(f"need at least 3 points, got {xy.shape[0]}")
    pts = _tie_break_positions(xy, spacing, tie_seed)
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise TriangulationError(f"Delaunay triangulation failed: {exc}") from exc
    simplices = tri.simplices.copy()
    a = pts[simplices[:, 0]]
    b = pts[simplices[:, 1]]
    c = pts[simplices[:, 2]]
    cross_z = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
               - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    flip = cross_z < 0
    simplices[flip, 1], simplices[flip, 2] = simplices[flip, 2], simplices[flip, 1]
    return simplices


def winding_from_points(xy, vectors, spacing, tie_seed=0, return_details=False):
    """Berg-Luscher winding number of unit vectors on arbitrary 2D points.

    Triangles are oriented counterclockwise in the plane viewed from +z; the
    per-triangle solid angle uses the two-argument arctangent so angles
    beyond +-pi/2 are handled. Sub-unit vectors are renormalized first;
    zero vectors raise DegenerateSpinError.
    """
    v = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(v, axis=1)
    bad = np.nonzero(norms < 1e-12)[0]
    if bad.size:
        raise DegenerateSpinError(
            f"zero Bloch vector at index {bad[0]} cannot define a winding direction"
        )
    u = v / norms[:, None]
    simplices = triangulate_ccw(xy, spacing, tie_seed)
    total = kernels.solid_angle_sum(u[simplices[:, 0]], u[simplices[:, 1]],
                                    u[simplices[:, 2]])
    q = total / (4.0 * np.pi)
    if return_details:
        return q, simplices
    return q


def winding_number(crystal, field, tie_seed=0, return_details=False):
    """Winding number Q of a Bloch field given in the rotated basis."""
    if field.n_ions != crystal.n_ions:
        raise InvalidParameterError(
            f"field has {field.n_ions} ions, crystal has {crystal.n_ions}"
        )
    return winding_from_points(crystal.xy, field.vectors, crystal.spacing,
                               tie_seed=tie_seed, return_details=return_details)


def winding_number_binned(binned, min_norm=0.05, return_details=False):
    """Winding number from a reconstructed binned field.

    Bin centres act as the point set. Bins with |u| below ``min_norm`` carry
    no usable direction and are excluded; the exclusion count is reported in
    the details.
    """
    mask = binned.occupied & (np.linalg.norm(binned.u, axis=1) >= min_norm)
    excluded = int(np.count_nonzero(binned.occupied) - np.count_nonzero(mask))
    xy = np.column_stack((binned.r_center[mask] * np.cos(binned.phi_center[mask]),
                          binned.r_center[mask] * np.sin(binned.phi_center[mask])))
    spacing_hint = np.max(binned.r_center) / max(binned.n_radial, 1)
    q = winding_from_points(xy, binned.u[mask], spacing_hint)
    if return_details:
        return q, excluded
    return q


def order_parameter(crystal, field):
    """Complex chiral order parameter of a lab-basis field.

    (1/N) * sum_j r_tilde_j exp(i phi_j) (u_z,j - i u_y,j). A non-zero
    magnitude signals spin orientation correlated with azimuth.
    """
    if field.n_ions != crystal.n_ions:
        raise InvalidParameterError(
            f"field has {field.n_ions} ions, crystal has {crystal.n_ions}"
        )
    u = field.vectors
    terms = crystal.r_tilde * np.exp(1j * crystal.phi) * (u[:, 2] - 1j * u[:, 1])
    return complex(terms.sum() / crystal.n_ions)


def order_parameter_binned(binned):
    """Ion-count-weighted order parameter over occupied bins (lab-basis u)."""
    mask = binned.occupied
    w = binned.n_ions[mask].astype(float)
    r_t = binned.r_center[mask] / np.max(binned.r_center)
    u = binned.u[mask]
    terms = w * r_t * np.exp(1j * binned.phi_center[mask]) * (u[:, 2] - 1j * u[:, 1])
    return complex(terms.sum() / w.sum())


def mean_fidelity(field, target):
    """Average single-site fidelity and the per-site values.

    F_j = (1 + u_j . v_j) / 2 with the reconstructed u entering unnormalized
    (sub-unit u is overlap against a mixed local state) and unit-norm targets.
    """
    u = field.vectors if hasattr(field, "vectors") else np.asarray(field, dtype=float)
    v = target.vectors if hasattr(target, "vectors") else np.asarray(target, dtype=float)
    if u.shape != v.shape:
        raise InvalidParameterError(f"shape mismatch: field {u.shape} vs target {v.shape}")
    vnorm = np.linalg.norm(v, axis=1)
    if np.any(np.abs(vnorm - 1.0) > 1e-6):
        raise InvalidParameterError("target vectors must be unit norm")
    per_site = 0.5 * (1.0 + np.einsum("ij,ij->i", u, v))
    return float(per_site.mean()), per_site


def fit_omega_r(series, crystal=None, n_starts=8):
    """Recover the edge Rabi rate from a winding-number time trace.

    ``series`` is a sequence of (t, Q) pairs, or (t, BlochField) pairs when a
    crystal is supplied (Q is then computed here, rotated-basis fields
    expected). Least squares against winding_continuum(omega_R * t) with
    multi-start over initial rates; returns (omega_R, standard_error) in
    rad/s.
    """
    ts, qs = [], []
    for t, item in series:
        ts.append(float(t))
        if hasattr(item, "vectors"):
            if crystal is None:
                raise InvalidParameterError("crystal required to fit field series")
            qs.append(winding_number(crystal, item))
        else:
            qs.append(float(item))
    ts = np.asarray(ts)
    qs = np.asarray(qs)
    if ts.size < 4:
        raise FitError(f"need at least 4 time points, got {ts.size}")
    if np.ptp(qs) < 1e-12:
        raise FitError("constant winding series: omega_R unidentifiable")

    t_span = np.ptp(ts)
    if t_span <= 0:
        raise FitError("time points must span a non-zero interval")

    def model(t, omega):
        return -(1.0 - np.cos(omega * t)) / 2.0

    best = None
    for k in range(1, n_starts + 1):
        guess = np.pi * k / t_span
        try:
            popt, pcov = curve_fit(model, ts, qs, p0=[guess], maxfev=20000)
        except RuntimeError:
            continue
        resid = float(np.sum((model(ts, popt[0]) - qs) ** 2))
        if best is None or resid < best[2]:
            best = (abs(float(popt[0])), pcov, resid)
    if best is None:
        raise FitError("omega_R fit did not converge from any start")
    omega, pcov, resid = best
    rms = np.sqrt(resid / ts.size)
    if rms > 0.2:
        raise FitError(f"omega_R fit residual too large (rms {rms:.3g})")
    err = float(np.sqrt(pcov[0, 0])) if np.isfinite(pcov[0, 0]) else np.inf
    return omega, err


@dataclass(frozen=True)
class EdgeFit:
    """Error-function edge fit result; widths in the units of the input radii."""

    width_10_90: float
    width_err: float
    r0: float
    sigma: float
    p_low: float
    p_high: float

    def to_json_dict(self):
        return {
            "width_10_90_um": self.width_10_90,
            "width_err_um": self.width_err,
            "r0_um": self.r0,
            "sigma_um": self.sigma,
            "p_low": self.p_low,
            "p_high": self.p_high,
        }


def fit_edge_width(profile):
    """Fit p(r) = p0 + (p1 - p0) * (1 + erf((r - r0) / (sqrt(2) sigma))) / 2.

    Returns an EdgeFit whose width is the 10-90% transition 2.5631 * sigma
    with the standard error propagated from the fit covariance. Needs at
    least 5 points straddling the transition.
    """
    prof = np.asarray(profile, dtype=float)
    if prof.ndim != 2 or prof.shape[1] != 2:
        raise InvalidParameterError("profile must be a sequence of (r, p) pairs")
    r, p = prof[:, 0], prof[:, 1]
    if r.size < 5:
        raise FitError(f"need at least 5 radial points, got {r.size}")
    if np.ptp(p) < 1e-12:
        raise FitError("flat profile: no edge to fit")

    def model(x, p0, p1, r0, sigma):
        return p0 + (p1 - p0) * 0.5 * (1.0 + erf((x - r0) / (np.sqrt(2.0) * sigma)))

    r_lo, r_hi = r.min(), r.max()
    span = r_hi - r_lo
    half = 0.5 * (p.min() + p.max())
    r0_guess = float(r[np.argmin(np.abs(p - half))])
    best = None
    for sigma_guess in (span / 50.0, span / 16.0, span / 6.0, span / 2.0):
        try:
            popt, pcov = curve_fit(
                model, r, p, p0=[p.min(), p.max(), r0_guess, sigma_guess],
                maxfev=20000,
            )
        except RuntimeError:
            continue
        resid = float(np.sum((model(r, *popt) - p) ** 2))
        if best is None or resid < best[2]:
            best = (popt, pcov, resid)
    if best is None:
        raise FitError("edge-width fit did not converge")
    popt, pcov, resid = best
    sigma = abs(float(popt[3]))
    sigma_err = float(np.sqrt(pcov[3, 3])) if np.isfinite(pcov[3, 3]) else np.inf
    return EdgeFit(
        width_10_90=EDGE_WIDTH_PER_SIGMA * sigma,
        width_err=EDGE_WIDTH_PER_SIGMA * sigma_err,
        r0=float(popt[2]),
        sigma=sigma,
        p_low=float(popt[0]),
        p_high=float(popt[1]),
    )


def expected_triangle_count(points_xy):
    """Euler-formula triangle count 2N - 2 - H for N points with H on the hull."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(points_xy)
    return 2 * points_xy.shape[0] - 2 - hull.vertices.size


@dataclass
class DiagnosticsReport:
    """Bundle of scalar diagnostics; fields are None until computed."""

    Q: float = None
    order_parameter_abs: float = None
    order_parameter_phase: float = None
    mean_fidelity: float = None
    omega_R_fit: float = None
    omega_R_fit_err: float = None
    edge_width_10_90: float = None
    edge_width_err: float = None
    triangle_count: int = None
    excluded_bins: int = None
    notes: dict = dc_field(default_factory=dict)

    def to_json_dict(self):
        d = {k: v for k, v in self.__dict__.items() if v is not None and k != "notes"}
        if self.notes:
            d["notes"] = self.notes
        return d

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
