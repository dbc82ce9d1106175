"""Per-ion Bloch vectors, global pulse rotations, and the visualisation basis.

A BlochField holds one 3-vector of Pauli expectation values per ion,
index-aligned with an IonCrystal. Pure single-ion states have unit norm;
reconstructed or ensemble-averaged fields may be sub-unit. Fields carry a
basis tag: "lab" for (X, Y, Z) and "rotated" for the visualisation triple
(Z, Y, -X).
"""

import json

import numpy as np

from .errors import InvalidParameterError, ParseError

LAB = "lab"
ROTATED = "rotated"


class BlochField:
    """Immutable (N, 3) array of Bloch vectors plus a basis tag."""

    def __init__(self, vectors, basis=LAB):
        v = np.ascontiguousarray(vectors, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidParameterError(f"vectors must have shape (N, 3), got {v.shape}")
        if basis not in (LAB, ROTATED):
            raise InvalidParameterError(f"basis must be 'lab' or 'rotated', got {basis!r}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms > 1.0 + 1e-9):
            raise InvalidParameterError(
                f"Bloch vector norm exceeds 1: max |u| = {norms.max():.12g}"
            )
        v.flags.writeable = False
        self.vectors = v
        self.basis = basis

    @property
    def n_ions(self):
        return self.vectors.shape[0]

    def norms(self):
        return np.linalg.norm(self.vectors, axis=1)

    def __eq__(self, other):
        if not isinstance(other, BlochField):
            return NotImplemented
        return self.basis == other.basis and np.array_equal(self.vectors, other.vectors)

    def __repr__(self):
        return f"BlochField(n_ions={self.n_ions}, basis={self.basis!r})"


class PulseOp:
    """Global rotation pulse: right-handed rotation of every Bloch vector
    about ``axis`` by ``angle`` (rad). The axis is normalized on input."""

    def __init__(self, axis, angle):
        a = np.asarray(axis, dtype=float).reshape(3)
        n = np.linalg.norm(a)
        if n < 1e-15:
            raise InvalidParameterError("pulse axis must have non-zero norm")
        self.axis = a / n
        self.axis.flags.writeable = False
        self.angle = float(angle)

    def __repr__(self):
        return f"PulseOp(axis={tuple(self.axis)}, angle={self.angle:g})"


def x_pulse(angle):
    return PulseOp((1.0, 0.0, 0.0), angle)


def y_pulse(angle):
    return PulseOp((0.0, 1.0, 0.0), angle)


def z_pulse(angle):
    return PulseOp((0.0, 0.0, 1.0), angle)


def rotate_vectors(vectors, axis, angle):
    """Rodrigues rotation of an (N, 3) array about a unit axis (right-handed)."""
    k = np.asarray(axis, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    return vectors * c + np.cross(k, vectors) * s + np.outer(vectors @ k, k) * (1.0 - c)


def rotate_global(field, pulse):
    """Apply a global pulse to every Bloch vector; norms are preserved.

    The convention is fixed here once: pulses rotate the Bloch VECTOR
    right-handedly about the stated axis. A global flip of this convention
    maps the winding number Q to -Q.
    """
    return BlochField(rotate_vectors(field.vectors, pulse.axis, pulse.angle), field.basis)


def to_rotated_basis(field):
    """Map lab components (x, y, z) to the visualisation triple (z, y, -x).

    Equivalent to rotating the Bloch sphere by pi/2 about the Y axis; the
    texture core prepared along +X appears at the bottom of the rotated
    sphere. Exact component shuffle, no rounding.
    """
    x, y, z = field.vectors.T
    return BlochField(np.column_stack((z, y, -x)), ROTATED)


def from_rotated_basis(field):
    """Exact inverse of :func:`to_rotated_basis`."""
    cx, cy, cz = field.vectors.T
    return BlochField(np.column_stack((-cz, cy, cx)), LAB)


def save_field_csv(field, path):
    """Write id,ux,uy,uz rows plus a JSON sidecar carrying the basis tag."""
    with open(path, "w") as fh:
        fh.write("id,ux,uy,uz\n")
        for i, (ux, uy, uz) in enumerate(field.vectors):
            fh.write(f"{i},{ux:.17g},{uy:.17g},{uz:.17g}\n")
    with open(_sidecar_path(path), "w") as fh:
        json.dump({"version": 1, "basis": field.basis, "n_ions": field.n_ions}, fh)
        fh.write("\n")


def load_field_csv(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "id,ux,uy,uz":
            raise ParseError(f"{path}: line 1: expected header 'id,ux,uy,uz', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(f"{path}: line {lineno}: expected 4 fields")
            try:
                rows.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no field records")
    basis = LAB
    try:
        with open(_sidecar_path(path)) as fh:
            basis = json.load(fh).get("basis", LAB)
    except FileNotFoundError:
        pass
    return BlochField(np.array(rows), basis)


def _sidecar_path(path):
    return str(path) + ".meta.json"
