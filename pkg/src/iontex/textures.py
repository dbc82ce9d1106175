"""Named texture preparations and their analytic targets.

Every protocol starts from all spins along +X (the pi/2|_y prep after
state initialisation) and drives the initialisation Hamiltonian for a
kind-specific angle, then applies global pulses:

* neel_skyrmion   -- drive angle pi, no pulses
* bloch_skyrmion  -- drive angle pi, then R_x(helicity); helicity +-pi/2
                     turns the radial winding tangential
* bimeron         -- drive angle pi, then pi/2|_y (tilts the core in-plane)
* anti_skyrmion   -- pi|_y acts on the initial state, so the drive starts
                     from -X and the final field is the exact pointwise
                     negation of the skyrmion; this flips Q from -1 to +1
                     (a rotation applied after the drive cannot change Q)
* meron           -- drive angle pi/2
* skyrmionium     -- drive angle 2*pi
* domain_wall     -- drive angle pi/10 (the full wall needs the repump
                     sweep, see repump.prepare_domain_wall)
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .dynamics import evolve_bloch_ode, evolve_closed_form
from .errors import InvalidParameterError
from .field import (
    LAB,
    BlochField,
    PulseOp,
    rotate_global,
    rotate_vectors,
    x_pulse,
    y_pulse,
)

NEEL_SKYRMION = "neel_skyrmion"
BLOCH_SKYRMION = "bloch_skyrmion"
ANTI_SKYRMION = "anti_skyrmion"
BIMERON = "bimeron"
MERON = "meron"
SKYRMIONIUM = "skyrmionium"
DOMAIN_WALL = "domain_wall"

DEFAULT_DRIVE_ANGLE = {
    NEEL_SKYRMION: np.pi,
    BLOCH_SKYRMION: np.pi,
    ANTI_SKYRMION: np.pi,
    BIMERON: np.pi,
    MERON: np.pi / 2,
    SKYRMIONIUM: 2 * np.pi,
    DOMAIN_WALL: np.pi / 10,
}

TEXTURE_KINDS = tuple(DEFAULT_DRIVE_ANGLE)


@dataclass(frozen=True)
class TextureSpec:
    """Recipe for a named texture.

    drive_angle is omega_R * t of the initialisation drive (defaults per
    kind); post_pulses are extra global rotations applied after the
    kind-specific ones; helicity sets the R_x angle of the Bloch skyrmion.
    """

    kind: str
    drive_angle: float = None
    post_pulses: tuple = dc_field(default_factory=tuple)
    helicity: float = np.pi / 2

    def __post_init__(self):
        if self.kind not in DEFAULT_DRIVE_ANGLE:
            raise InvalidParameterError(
                f"unknown texture kind {self.kind!r}; expected one of {TEXTURE_KINDS}"
            )
        if self.drive_angle is None:
            object.__setattr__(self, "drive_angle", DEFAULT_DRIVE_ANGLE[self.kind])
        if self.drive_angle < 0:
            raise InvalidParameterError(
                f"drive_angle must be non-negative, got {self.drive_angle}"
            )
        object.__setattr__(self, "post_pulses", tuple(self.post_pulses))
        for p in self.post_pulses:
            if not isinstance(p, PulseOp):
                raise InvalidParameterError("post_pulses must contain PulseOp items")


def kind_pulses(spec):
    """Built-in global pulses applied after the drive for this kind."""
    if spec.kind == BLOCH_SKYRMION:
        return (x_pulse(spec.helicity),)
    if spec.kind == BIMERON:
        return (y_pulse(np.pi / 2),)
    return ()


def _drive_vectors(spec, psi, r_tilde, phi):
    """Closed-form lab-basis drive texture on (r_tilde, phi) points."""
    theta = np.asarray(r_tilde, dtype=float) * spec.drive_angle
    chi = np.asarray(phi, dtype=float) + psi
    s = np.sin(theta)
    u = np.column_stack((np.cos(theta), s * np.cos(chi), -s * np.sin(chi)))
    if spec.kind == ANTI_SKYRMION:
        u = -u
    return u


class TextureTarget:
    """Analytic noise-free target field, evaluable at arbitrary positions.

    Used both to build per-ion target fields and to evaluate targets at
    azimuthally shifted bin centres during phase alignment.
    """

    def __init__(self, spec, psi):
        self.spec = spec
        self.psi = float(psi)
        self._pulses = kind_pulses(spec) + spec.post_pulses

    def __call__(self, r_tilde, phi):
        u = _drive_vectors(self.spec, self.psi, r_tilde, phi)
        if self.spec.kind == DOMAIN_WALL:
            outer = np.asarray(r_tilde, dtype=float) >= 0.5
            u[outer] = (-1.0, 0.0, 0.0)  # reset orientation after the trailing -pi/2|_y
        for p in self._pulses:
            u = rotate_vectors(u, p.axis, p.angle)
        return u


def target_texture(crystal, spec, psi):
    """Analytic lab-basis target field at the crystal's ion positions."""
    return BlochField(TextureTarget(spec, psi)(crystal.r_tilde, crystal.phi), LAB)


def prepare_texture(crystal, params, spec, initial=None):
    """Run the preparation protocol and return the lab-basis field.

    The closed form covers +-X starts (the anti-skyrmion's pi|_y negates the
    initial +X state, and the drive is linear, so its output is the exact
    negation of the skyrmion's). A user-supplied ``initial`` field goes
    through the Bloch-ODE path instead.
    """
    t = spec.drive_angle / params.omega_R
    if initial is None:
        if spec.kind == ANTI_SKYRMION:
            u = -evolve_closed_form(crystal, params, t).vectors
            out = BlochField(u, LAB)
        else:
            out = evolve_closed_form(crystal, params, t)
    else:
        if spec.kind == ANTI_SKYRMION:
            initial = rotate_global(initial, y_pulse(np.pi))
        out = evolve_bloch_ode(crystal, params, initial, t)
    for p in kind_pulses(spec) + spec.post_pulses:
        out = rotate_global(out, p)
    return out
