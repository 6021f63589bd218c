"""rf-dressed adiabatic potentials, mixing angles and forces.

Sign conventions used everywhere in the package:

* detuning ``Delta = omega_rf - V0/hbar`` (rf offset from the trap-centre Zeeman splitting);
* local detuning ``Delta_local(r) = Delta - V_trap(r)/hbar``, zero on the resonant shell.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateGradientError, DomainError
from .field import RB87, PhysicalConstants, TrapPotential, check_in_box

_KINK_STEP = 1e-8  # m, "on the shell" neighbourhood when Omega = 0


@dataclass(frozen=True)
class RfDrive:
    omega_rf: float
    Omega: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.omega_rf > 0:
            raise DomainError("omega_rf must be > 0")
        if not self.Omega >= 0:
            raise DomainError("Omega must be >= 0")

    @classmethod
    def from_detuning(cls, trap: TrapPotential, Delta, Omega, phase=0.0):
        return cls(omega_rf=Delta + trap.V0 / trap.constants.hbar, Omega=Omega, phase=phase)

    def detuning(self, trap: TrapPotential) -> float:
        return self.omega_rf - trap.V0 / trap.constants.hbar


def adiabatic_energy(V_trap_val, Delta, Omega, constants: PhysicalConstants = RB87):
    """sqrt((V_trap - hbar Delta)^2 + (hbar Omega)^2), the dressed energy per unit m_F."""
    hb = constants.hbar
    return np.hypot(np.asarray(V_trap_val) - hb * Delta, hb * Omega)


def mixing_angle(Delta_local, Omega):
    """(cos theta, sin theta) of the dressed spin axis relative to the local field.

    cos theta = -Delta_local / sqrt(Delta_local^2 + Omega^2); see the module
    docstring for the sign of Delta_local.
    """
    Delta_local = np.asarray(Delta_local, dtype=float)
    norm = np.hypot(Delta_local, Omega)
    if np.any(norm == 0):
        raise DomainError("mixing angle undefined for Delta_local = Omega = 0")
    return -Delta_local / norm, Omega / norm


def rabi_from_field_amplitude(B1, constants: PhysicalConstants = RB87) -> float:
    """Omega = g_F mu_B B1 / (2 hbar)."""
    if B1 < 0:
        raise DomainError("B1 must be >= 0")
    return constants.g_F * constants.mu_B * B1 / (2 * constants.hbar)


def field_amplitude_from_rabi(Omega, constants: PhysicalConstants = RB87) -> float:
    if Omega < 0:
        raise DomainError("Omega must be >= 0")
    return 2 * constants.hbar * Omega / (constants.g_F * constants.mu_B)


def energy_and_force(trap: TrapPotential, r, Delta, Omega, mF=2, gravity=True):
    """Vectorised kernel: (U, F, V_trap, grad V_trap) at positions r (..., 3).

    Delta and Omega may be scalars or broadcast against r[..., 0]. No box check,
    no kink check: this is the inner loop of the integrator.
    """
    c = trap.constants
    vt, gvt = trap.value_and_gradient(r)
    s = vt - c.hbar * Delta
    V = np.hypot(s, c.hbar * Omega)
    U = mF * V
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(V > 0, s / V, 0.0)
    F = -(mF * ratio)[..., None] * gvt
    if gravity:
        U = U + c.m_atom * c.g_grav * np.asarray(r)[..., 2]
        F[..., 2] -= c.m_atom * c.g_grav
    return U, F, vt, gvt


@dataclass(frozen=True)
class DressedPotential:
    """Total potential m_F V(r) (+ m g z) for one dressed level and a fixed drive."""

    trap: TrapPotential
    drive: RfDrive
    mF: int = 2
    include_gravity: bool = True

    def __post_init__(self):
        if self.mF not in (-2, -1, 0, 1, 2):
            raise DomainError(f"mF = {self.mF} outside -2..2")

    @classmethod
    def from_detuning(cls, trap, Delta, Omega, mF=2, include_gravity=True):
        return cls(trap, RfDrive.from_detuning(trap, Delta, Omega), mF, include_gravity)

    @property
    def constants(self) -> PhysicalConstants:
        return self.trap.constants

    @property
    def Delta(self) -> float:
        return self.drive.detuning(self.trap)

    @property
    def Omega(self) -> float:
        return self.drive.Omega

    def with_level(self, mF):
        return replace(self, mF=mF)

    def with_drive(self, Delta=None, Omega=None):
        Delta = self.Delta if Delta is None else Delta
        Omega = self.Omega if Omega is None else Omega
        return replace(self, drive=RfDrive.from_detuning(self.trap, Delta, Omega, self.drive.phase))

    def total(self, r):
        U, _, _, _ = energy_and_force(self.trap, r, self.Delta, self.Omega, self.mF, self.include_gravity)
        return U

    def force(self, r):
        _, F, _, _ = energy_and_force(self.trap, r, self.Delta, self.Omega, self.mF, self.include_gravity)
        return F

    def local_detuning(self, r):
        return self.Delta - self.trap.value(r) / self.constants.hbar


def total_potential(dressed: DressedPotential, r):
    check_in_box(r)
    return dressed.total(r)


def force(dressed: DressedPotential, r):
    """-grad(total potential), analytic."""
    check_in_box(r)
    if dressed.Omega == 0 and dressed.mF != 0:
        vt, gvt = dressed.trap.value_and_gradient(r)
        dist = np.abs(vt - dressed.constants.hbar * dressed.Delta) / np.maximum(
            np.linalg.norm(gvt, axis=-1), 1e-300
        )
        if np.any(dist < _KINK_STEP):
            raise DegenerateGradientError("Omega = 0 and position on the resonance shell: gradient undefined")
    return dressed.force(r)


def dressed_manifold(dressed: DressedPotential, r):
    """Energies m_F V(r) for m_F = -2..+2, stacked on a leading axis (gravity excluded)."""
    check_in_box(r)
    V = adiabatic_energy(dressed.trap.value(r), dressed.Delta, dressed.Omega, dressed.constants)
    return np.stack([mF * V for mF in (-2, -1, 0, 1, 2)])
