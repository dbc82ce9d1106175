"""Finite-shot three-axis readout, polar binning, and Bloch reconstruction.

Shots are Bernoulli draws of per-ion spin-up probabilities with a symmetric
misclassification rate epsilon folded in: p' = p (1 - eps) + (1 - p) eps.
Outcomes are aggregated into equal-width radial-annulus x azimuthal-sector
bins; local Bloch vectors come from the binned probabilities as
u = 2 p - 1 per axis. A rigid azimuthal offset between data and target
(the drive-phase freedom) is fitted in post-processing.
"""

import json
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .errors import (
    IncompleteDataError,
    InvalidParameterError,
    NoUniquePhaseError,
    ParseError,
)

BASES = ("x", "y", "z")
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ShotRecord:
    """Binary outcomes of repeated projective readout along one axis.

    outcomes has shape (n_shots, n_ions); 1 means bright (spin up along the
    measured axis). Expectation-mode records carry one row of exact
    probabilities instead of bits (flagged by ``expectation``), which lets
    the same binning path serve analytic pipelines. ``phi_offsets`` holds
    the per-shot rigid crystal rotation when the orientation is unlocked.
    """

    basis: str
    outcomes: np.ndarray
    seed: int = None
    epsilon: float = 0.0
    expectation: bool = False
    phi_offsets: np.ndarray = None

    def __post_init__(self):
        if self.basis not in BASES:
            raise InvalidParameterError(f"basis must be one of {BASES}, got {self.basis!r}")
        if not 0.0 <= self.epsilon < 0.5:
            raise InvalidParameterError(f"epsilon must be in [0, 0.5), got {self.epsilon}")
        out = np.ascontiguousarray(self.outcomes, dtype=float)
        if out.ndim != 2:
            raise InvalidParameterError("outcomes must be (n_shots, n_ions)")
        out.flags.writeable = False
        object.__setattr__(self, "outcomes", out)
        if self.phi_offsets is not None:
            off = np.ascontiguousarray(self.phi_offsets, dtype=float)
            if off.shape != (out.shape[0],):
                raise InvalidParameterError("phi_offsets must have one entry per shot")
            off.flags.writeable = False
            object.__setattr__(self, "phi_offsets", off)

    @property
    def n_shots(self):
        return self.outcomes.shape[0]

    @property
    def n_ions(self):
        return self.outcomes.shape[1]


def outcome_probabilities(field, basis, epsilon):
    """Exact per-ion bright probability for one readout axis."""
    idx = BASES.index(basis)
    p = 0.5 * (1.0 + field.vectors[:, idx])
    return p * (1.0 - epsilon) + (1.0 - p) * epsilon


def simulate_shots(field, basis, n_shots, epsilon=0.0, seed=None):
    """Draw projective outcomes for every ion; deterministic given the seed."""
    if n_shots < 1:
        raise InvalidParameterError(f"n_shots must be at least 1, got {n_shots}")
    p = outcome_probabilities(field, basis, epsilon)
    rng = np.random.default_rng(seed)
    bits = (rng.random((int(n_shots), field.n_ions)) < p).astype(float)
    return ShotRecord(basis=basis, outcomes=bits, seed=seed, epsilon=epsilon)


def expectation_record(field, basis, epsilon=0.0):
    """Shot record holding the exact outcome probabilities (no sampling)."""
    p = outcome_probabilities(field, basis, epsilon)
    return ShotRecord(basis=basis, outcomes=p[None, :], epsilon=epsilon,
                      expectation=True)


@dataclass(frozen=True)
class BinnedField:
    """Polar-binned probabilities and reconstructed Bloch vectors.

    Arrays are flattened over the (n_radial, n_azimuthal) grid, radial-major.
    ``p`` holds the bright probability per basis (columns x, y, z; NaN where
    the basis is absent or the bin is empty). ``n_ions`` is the mean number
    of ions mapped to the bin per shot (an exact integer when the crystal
    orientation is locked); empty bins are flagged, never imputed. ``u`` is
    NaN until :func:`reconstruct_bloch` fills it.
    """

    n_radial: int
    n_azimuthal: int
    R: float
    r_center: np.ndarray
    phi_center: np.ndarray
    p: np.ndarray
    n_ions: np.ndarray
    u: np.ndarray = None
    phase_offset: float = 0.0

    def __post_init__(self):
        if self.u is None:
            object.__setattr__(self, "u", np.full((self.n_bins, 3), np.nan))
        for name in ("r_center", "phi_center", "p", "n_ions", "u"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_bins(self):
        return self.n_radial * self.n_azimuthal

    @property
    def occupied(self):
        return self.n_ions > 0

    @property
    def r_tilde_center(self):
        return self.r_center / self.R


def bin_indices(r_tilde, phi, n_radial, n_azimuthal):
    """Flat bin index per point; r_tilde = 1 falls in the outermost annulus."""
    ri = np.minimum((r_tilde * n_radial).astype(int), n_radial - 1)
    ai = np.mod(phi, _TWO_PI) / (_TWO_PI / n_azimuthal)
    ai = np.minimum(ai.astype(int), n_azimuthal - 1)
    return ri * n_azimuthal + ai


def bin_polar(crystal, records, n_radial=10, n_azimuthal=22):
    """Aggregate spin-up probabilities into polar bins.

    ``records`` maps basis name to ShotRecord (any subset of x, y, z; all
    three are needed later for reconstruction). Each ion is assigned by
    (r_tilde, phi) to one bin; the bin probability is the mean outcome over
    ions-in-bin and shots. Per-shot azimuthal offsets, when present on a
    record, shift the assignment shot by shot.
    """
    if n_radial < 1 or n_azimuthal < 1:
        raise InvalidParameterError("bin grid must have at least one row and column")
    if not records:
        raise IncompleteDataError("no shot records supplied")
    for b, rec in records.items():
        if rec.basis != b:
            raise InvalidParameterError(f"record under key {b!r} has basis {rec.basis!r}")
        if rec.n_ions != crystal.n_ions:
            raise InvalidParameterError(
                f"record for basis {b!r} has {rec.n_ions} ions, crystal has {crystal.n_ions}"
            )

    n_bins = n_radial * n_azimuthal
    p = np.full((n_bins, 3), np.nan)
    counts_ref = None
    for col, b in enumerate(BASES):
        rec = records.get(b)
        if rec is None:
            continue
        sums = np.zeros(n_bins)
        counts = np.zeros(n_bins)
        if rec.phi_offsets is None:
            idx = bin_indices(crystal.r_tilde, crystal.phi, n_radial, n_azimuthal)
            np.add.at(sums, idx, rec.outcomes.sum(axis=0))
            np.add.at(counts, idx, float(rec.n_shots))
        else:
            for s in range(rec.n_shots):
                idx = bin_indices(crystal.r_tilde, crystal.phi + rec.phi_offsets[s],
                                  n_radial, n_azimuthal)
                np.add.at(sums, idx, rec.outcomes[s])
                np.add.at(counts, idx, 1.0)
        occ = counts > 0
        p[occ, col] = sums[occ] / counts[occ]
        per_shot = counts / max(rec.n_shots, 1)
        counts_ref = per_shot if counts_ref is None else np.maximum(counts_ref, per_shot)

    r_idx, a_idx = np.divmod(np.arange(n_bins), n_azimuthal)
    r_center = (r_idx + 0.5) / n_radial * crystal.R
    phi_center = (a_idx + 0.5) * _TWO_PI / n_azimuthal
    return BinnedField(n_radial=n_radial, n_azimuthal=n_azimuthal, R=crystal.R,
                       r_center=r_center, phi_center=phi_center, p=p,
                       n_ions=counts_ref)


def reconstruct_bloch(binned, phase_offset=0.0):
    """Fill in u = (2 p_x - 1, 2 p_y - 1, 2 p_z - 1) per occupied bin.

    The azimuthal coordinate of every bin is shifted by ``phase_offset``
    before later comparison with targets (targets get evaluated at
    phi + offset). All three basis probabilities must be present.
    """
    occ = binned.occupied
    for col, b in enumerate(BASES):
        if np.any(np.isnan(binned.p[occ, col])):
            raise IncompleteDataError(f"basis {b!r} missing from binned probabilities")
    u = 2.0 * binned.p - 1.0
    u[~occ] = np.nan
    phi = np.mod(binned.phi_center + phase_offset, _TWO_PI)
    return replace(binned, u=u, phi_center=phi,
                   phase_offset=binned.phase_offset + phase_offset)


def fit_phase_offset(binned, target, resolution_deg=0.25):
    """Azimuthal shift maximizing mean fidelity between bins and target.

    ``target`` is an analytic evaluator (r_tilde, phi) -> (n, 3) unit
    vectors, e.g. :class:`iontex.textures.TextureTarget`. The search scans
    the full circle at ``resolution_deg`` and refines the best point
    parabolically. Azimuthally featureless data raise NoUniquePhaseError.
    """
    occ = binned.occupied
    if not np.any(occ):
        raise IncompleteDataError("binned field has no occupied bins")
    u = binned.u[occ]
    if np.any(np.isnan(u)):
        raise IncompleteDataError("binned field must be reconstructed before phase fitting")
    r_t = binned.r_tilde_center[occ]
    phi = binned.phi_center[occ]

    def fbar(delta):
        v = target(r_t, phi + delta)
        return 0.5 * (1.0 + np.einsum("ij,ij->i", u, v)).mean()

    step = np.deg2rad(resolution_deg)
    grid = np.arange(0.0, _TWO_PI, step)
    scores = np.array([fbar(d) for d in grid])
    if np.ptp(scores) < 1e-9:
        raise NoUniquePhaseError(
            "no azimuthal dipole pattern: phase offset is not identifiable"
        )
    k = int(np.argmax(scores))
    f0, f1, f2 = scores[k - 1], scores[k], scores[(k + 1) % grid.size]
    denom = f0 - 2.0 * f1 + f2
    shift = 0.0 if denom == 0 else 0.5 * (f0 - f2) / denom
    best = grid[k] + np.clip(shift, -1.0, 1.0) * step
    return float(np.mod(best + np.pi, _TWO_PI) - np.pi)


# ---------------------------------------------------------------------------
# texture measurement pipeline

def simulate_texture_records(crystal, target, n_shots, epsilon=0.0, seed=None,
                             psi_jitter=0.0, unlock_orientation=False,
                             psi=np.pi / 2):
    """Three-basis shot records for an analytically prepared texture.

    ``target`` is a TextureTarget-like evaluator. With ``psi_jitter`` > 0
    the drive phase wanders shot to shot (Gaussian, rad); with
    ``unlock_orientation`` the crystal carries a uniform random rigid
    rotation per shot, recorded on the returned records so binning can
    follow it. Plain records (no per-shot structure) are produced when both
    options are off.
    """
    from .field import BlochField
    from .textures import TextureTarget

    ss = np.random.SeedSequence(seed)
    seeds = ss.spawn(len(BASES))
    records = {}
    for b, child in zip(BASES, seeds):
        rng = np.random.default_rng(child)
        if psi_jitter == 0.0 and not unlock_orientation:
            u = target(crystal.r_tilde, crystal.phi)
            rec = simulate_shots(BlochField(u), b, n_shots, epsilon,
                                 seed=rng.integers(2 ** 63))
            records[b] = rec
            continue
        col = BASES.index(b)
        bits = np.empty((n_shots, crystal.n_ions))
        offsets = np.zeros(n_shots)
        for s in range(n_shots):
            psi_s = psi + (psi_jitter * rng.standard_normal() if psi_jitter else 0.0)
            if unlock_orientation:
                offsets[s] = rng.random() * _TWO_PI
            ev = TextureTarget(replace_psi(target, psi_s), psi_s) if psi_jitter else target
            u = ev(crystal.r_tilde, crystal.phi + offsets[s])
            p = 0.5 * (1.0 + u[:, col])
            p = p * (1.0 - epsilon) + (1.0 - p) * epsilon
            bits[s] = rng.random(crystal.n_ions) < p
        records[b] = ShotRecord(basis=b, outcomes=bits, epsilon=epsilon,
                                phi_offsets=offsets if unlock_orientation else None)
    return records


def replace_psi(target, psi):
    """Spec of a TextureTarget with the drive phase replaced."""
    return target.spec


# ---------------------------------------------------------------------------
# serialization

def save_shots_csv(record, path):
    """Compact CSV (shot, ion, bit) with a JSON header sidecar."""
    if record.expectation:
        raise InvalidParameterError("expectation records have no shot rows to export")
    with open(path, "w") as fh:
        fh.write("shot,ion,bit\n")
        for s in range(record.n_shots):
            row = record.outcomes[s]
            for i in range(record.n_ions):
                fh.write(f"{s},{i},{int(row[i])}\n")
    _write_shot_header(record, str(path) + ".meta.json")


def save_shots_binary(record, path):
    """Dense packed bits with a JSON header sidecar."""
    if record.expectation:
        raise InvalidParameterError("expectation records have no shot rows to export")
    bits = record.outcomes.astype(np.uint8)
    np.packbits(bits, axis=None).tofile(path)
    _write_shot_header(record, str(path) + ".meta.json")


def _write_shot_header(record, path):
    header = {
        "version": 1,
        "n_shots": record.n_shots,
        "n_ions": record.n_ions,
        "basis": record.basis,
        "seed": record.seed,
        "epsilon": record.epsilon,
    }
    if record.phi_offsets is not None:
        header["phi_offsets"] = [float(v) for v in record.phi_offsets]
    with open(path, "w") as fh:
        json.dump(header, fh, sort_keys=True)
        fh.write("\n")


def _read_shot_header(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"missing shot header {path}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc


def load_shots_csv(path):
    header = _read_shot_header(str(path) + ".meta.json")
    bits = np.zeros((header["n_shots"], header["n_ions"]))
    with open(path) as fh:
        head = fh.readline().strip()
        if head != "shot,ion,bit":
            raise ParseError(f"{path}: line 1: expected header 'shot,ion,bit'")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                s, i, b = (int(x) for x in line.split(","))
                bits[s, i] = b
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    offsets = header.get("phi_offsets")
    return ShotRecord(basis=header["basis"], outcomes=bits, seed=header["seed"],
                      epsilon=header["epsilon"],
                      phi_offsets=None if offsets is None else np.asarray(offsets))


def load_shots_binary(path):
    header = _read_shot_header(str(path) + ".meta.json")
    n = header["n_shots"] * header["n_ions"]
    packed = np.fromfile(path, dtype=np.uint8)
    bits = np.unpackbits(packed)[:n].reshape(header["n_shots"], header["n_ions"])
    offsets = header.get("phi_offsets")
    return ShotRecord(basis=header["basis"], outcomes=bits.astype(float),
                      seed=header["seed"], epsilon=header["epsilon"],
                      phi_offsets=None if offsets is None else np.asarray(offsets))


def save_binned_csv(binned, path):
    cols = "r_center,phi_center,px,py,pz,ux,uy,uz,n_ions"
    with open(path, "w") as fh:
        fh.write(cols + "\n")
        for i in range(binned.n_bins):
            vals = [binned.r_center[i], binned.phi_center[i],
                    *binned.p[i], *binned.u[i], binned.n_ions[i]]
            fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")
    meta = {"version": 1, "n_radial": binned.n_radial,
            "n_azimuthal": binned.n_azimuthal, "R_um": binned.R,
            "phase_offset": binned.phase_offset}
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_binned_csv(path):
    meta = _read_shot_header(str(path) + ".meta.json")
    rows = []
    with open(path) as fh:
        fh.readline()
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    if not rows:
        raise ParseError(f"{path}: no binned records")
    arr = np.asarray(rows)
    return BinnedField(n_radial=meta["n_radial"], n_azimuthal=meta["n_azimuthal"],
                       R=meta["R_um"], r_center=arr[:, 0], phi_center=arr[:, 1],
                       p=arr[:, 2:5], n_ions=arr[:, 8], u=arr[:, 5:8],
                       phase_offset=meta.get("phase_offset", 0.0))
