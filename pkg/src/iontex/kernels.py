"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

Two kernels live here:

* ``full_drive_bloch`` -- time-ordered integration of the un-approximated
  dressed-frame drive for every ion (the dominant cost of the package).
* ``solid_angle_sum`` -- Berg-Luscher signed solid angles over a triangle
  list.

Set the environment variable ``IONTEX_NO_NUMBA=1`` to force the pure-numpy
path (also taken automatically when numba is not importable). Both paths
implement the same fourth-order commutator-free Magnus scheme and agree to
~1e-12; ``benchmarks/bench_kernels.py`` compares their speed.
"""

import math
import os

import numpy as np

_ENV_FLAG = "IONTEX_NO_NUMBA"

# Gauss-Legendre nodes and CF4 weights for the two-exponential Magnus step.
_C1 = 0.5 - math.sqrt(3.0) / 6.0
_C2 = 0.5 + math.sqrt(3.0) / 6.0
_A1 = 0.25 + math.sqrt(3.0) / 6.0
_A2 = 0.25 - math.sqrt(3.0) / 6.0


def numba_disabled_by_env():
    return os.environ.get(_ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


def _full_drive_loop(r_um, phi, v0, t, n_steps,
                     delta_ac, dk_x, mu_r, psi, omega_mw, omega_r):
    """Scalar per-ion loop; compiled by numba when available.

    Drive: H_j(t) = f_j(t) (cos(Omega t) sz + sin(Omega t) sy) with
    f_j(t) = delta_ac * sin(dk_x * r_j * cos(omega_r t + phi_j) - mu_r t + psi),
    so the Bloch vector precesses at rate 2 f_j(t) about (0, sin Omega t,
    cos Omega t). Each CF4 substep applies two exact Rodrigues rotations.
    """
    n = r_um.shape[0]
    out = np.empty((n, 3))
    h = t / n_steps
    for j in range(n):
        r = r_um[j]
        ph = phi[j]
        vx = v0[j, 0]
        vy = v0[j, 1]
        vz = v0[j, 2]
        for k in range(n_steps):
            t0 = k * h
            ta = t0 + _C1 * h
            tb = t0 + _C2 * h
            fa = 2.0 * delta_ac * math.sin(dk_x * r * math.cos(omega_r * ta + ph)
                                           - mu_r * ta + psi)
            fb = 2.0 * delta_ac * math.sin(dk_x * r * math.cos(omega_r * tb + ph)
                                           - mu_r * tb + psi)
            ya = fa * math.sin(omega_mw * ta)
            za = fa * math.cos(omega_mw * ta)
            yb = fb * math.sin(omega_mw * tb)
            zb = fb * math.cos(omega_mw * tb)
            # first exponential weights the early node more
            for (wy, wz) in ((_A1 * ya + _A2 * yb, _A1 * za + _A2 * zb),
                             (_A2 * ya + _A1 * yb, _A2 * za + _A1 * zb)):
                ang = h * math.sqrt(wy * wy + wz * wz)
                if ang > 0.0:
                    ky = wy / math.sqrt(wy * wy + wz * wz)
                    kz = wz / math.sqrt(wy * wy + wz * wz)
                    c = math.cos(ang)
                    s = math.sin(ang)
                    # k = (0, ky, kz): k x v and (k . v) k expanded
                    cx = ky * vz - kz * vy
                    cy = kz * vx
                    cz = -ky * vx
                    d = ky * vy + kz * vz
                    vx = vx * c + cx * s
                    vy = vy * c + cy * s + ky * d * (1.0 - c)
                    vz = vz * c + cz * s + kz * d * (1.0 - c)
        out[j, 0] = vx
        out[j, 1] = vy
        out[j, 2] = vz
    return out


def _full_drive_numpy(r_um, phi, v0, t, n_steps,
                      delta_ac, dk_x, mu_r, psi, omega_mw, omega_r):
    """Vectorized-over-ions fallback; same CF4 scheme as the scalar loop."""
    v = np.array(v0, dtype=float)
    h = t / n_steps
    for k in range(n_steps):
        t0 = k * h
        for tk_w in (((t0 + _C1 * h, _A1), (t0 + _C2 * h, _A2)),
                     ((t0 + _C1 * h, _A2), (t0 + _C2 * h, _A1))):
            wy = np.zeros_like(r_um)
            wz = np.zeros_like(r_um)
            for tk, wgt in tk_w:
                f = 2.0 * delta_ac * np.sin(dk_x * r_um * np.cos(omega_r * tk + phi)
                                            - mu_r * tk + psi)
                wy += wgt * f * np.sin(omega_mw * tk)
                wz += wgt * f * np.cos(omega_mw * tk)
            nrm = np.hypot(wy, wz)
            ang = h * nrm
            safe = np.where(nrm > 0.0, nrm, 1.0)
            ky = wy / safe
            kz = wz / safe
            c = np.cos(ang)
            s = np.sin(ang)
            cx = ky * v[:, 2] - kz * v[:, 1]
            cy = kz * v[:, 0]
            cz = -ky * v[:, 0]
            d = ky * v[:, 1] + kz * v[:, 2]
            vx = v[:, 0] * c + cx * s
            vy = v[:, 1] * c + cy * s + ky * d * (1.0 - c)
            vz = v[:, 2] * c + cz * s + kz * d * (1.0 - c)
            v = np.column_stack((vx, vy, vz))
    return v


def _solid_angle_loop(ua, ub, uc):
    """Sum of signed spherical-triangle solid angles, atan2 form."""
    total = 0.0
    for i in range(ua.shape[0]):
        ax, ay, az = ua[i, 0], ua[i, 1], ua[i, 2]
        bx, by, bz = ub[i, 0], ub[i, 1], ub[i, 2]
        cx, cy, cz = uc[i, 0], uc[i, 1], uc[i, 2]
        triple = (ax * (by * cz - bz * cy)
                  + ay * (bz * cx - bx * cz)
                  + az * (bx * cy - by * cx))
        den = (1.0 + ax * bx + ay * by + az * bz
               + bx * cx + by * cy + bz * cz
               + cx * ax + cy * ay + cz * az)
        total += 2.0 * math.atan2(triple, den)
    return total


def _solid_angle_numpy(ua, ub, uc):
    triple = np.einsum("ij,ij->i", ua, np.cross(ub, uc))
    den = (1.0
           + np.einsum("ij,ij->i", ua, ub)
           + np.einsum("ij,ij->i", ub, uc)
           + np.einsum("ij,ij->i", uc, ua))
    return float(np.sum(2.0 * np.arctan2(triple, den)))


NUMBA_ENABLED = False
if not numba_disabled_by_env():
    try:
        from numba import njit

        _full_drive_jit = njit(cache=True)(_full_drive_loop)
        _solid_angle_jit = njit(cache=True)(_solid_angle_loop)
        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def full_drive_bloch(r_um, phi, v0, t, n_steps,
                     delta_ac, dk_x, mu_r, psi, omega_mw, omega_r):
    """Dispatch to the numba kernel when enabled, else the numpy fallback."""
    args = (np.ascontiguousarray(r_um, dtype=float),
            np.ascontiguousarray(phi, dtype=float),
            np.ascontiguousarray(v0, dtype=float),
            float(t), int(n_steps),
            float(delta_ac), float(dk_x), float(mu_r), float(psi),
            float(omega_mw), float(omega_r))
    if NUMBA_ENABLED:
        return _full_drive_jit(*args)
    return _full_drive_numpy(*args)


def solid_angle_sum(ua, ub, uc):
    """Total signed solid angle of unit-vector triangles (A, B, C)."""
    if NUMBA_ENABLED:
        return _solid_angle_jit(np.ascontiguousarray(ua), np.ascontiguousarray(ub),
                                np.ascontiguousarray(uc))
    return _solid_angle_numpy(ua, ub, uc)
