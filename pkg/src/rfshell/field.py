"""Physical constants and the Ioffe-Pritchard static field model.

Everything is SI internally (tesla, metre, joule). The helpers ``GAUSS``,
``GAUSS_PER_CM`` and ``GAUSS_PER_CM2`` convert lab units at the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants as sc

from .errors import CalibrationError, DomainError

GAUSS = 1e-4
GAUSS_PER_CM = 1e-2  # T/m
GAUSS_PER_CM2 = 1.0  # T/m^2

BOX_HALF_X = 1e-2
BOX_RHO = 5e-3


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = sc.hbar
    h: float = sc.h
    mu_B: float = sc.physical_constants["Bohr magneton"][0]
    k_B: float = sc.k
    m_atom: float = 1.4432e-25  # 87Rb
    g_grav: float = 9.81
    g_F: float = 0.5  # F = 2 ground state
    a_s: float = 5.24e-9
    zeta3: float = 1.20206

    def __post_init__(self):
        for name in ("hbar", "h", "mu_B", "k_B", "m_atom", "g_grav", "g_F", "a_s", "zeta3"):
            if not getattr(self, name) > 0:
                raise DomainError(f"constant {name} must be positive")

    @property
    def zeeman_hz_per_tesla(self) -> float:
        """g_F mu_B / h, i.e. rf resonance shift per tesla for one unit of m_F."""
        return self.g_F * self.mu_B / self.h


RB87 = PhysicalConstants()


def check_in_box(r) -> None:
    """Raise DomainError if any position lies outside |x| <= 1 cm, rho <= 5 mm."""
    r = np.asarray(r, dtype=float)
    x = r[..., 0]
    rho = np.hypot(r[..., 1], r[..., 2])
    if np.any(~np.isfinite(r)):
        raise DomainError("position contains non-finite coordinates")
    if np.any(np.abs(x) > BOX_HALF_X):
        raise DomainError(f"x = {np.max(np.abs(x)):.4g} m outside validity box |x| <= {BOX_HALF_X} m")
    if np.any(rho > BOX_RHO):
        bad = np.argmax(rho)
        y, z = np.reshape(r, (-1, 3))[bad, 1:]
        raise DomainError(
            f"rho = {np.max(rho):.4g} m (y = {y:.4g}, z = {z:.4g}) outside validity box rho <= {BOX_RHO} m"
        )


@dataclass(frozen=True)
class IoffePritchardField:
    """Ioffe-Pritchard expansion with the weak (long) axis along x.

        Bx = B0 + b''/2 (x^2 - (y^2 + z^2)/2)
        By = -b' y - c b''/2 x y
        Bz = +b' z - c b''/2 x z

    ``cross_terms`` switches c between 0 (the cylindrically symmetric form,
    default) and 1 (the divergence- and curl-free expansion, whose |B| is not
    even in x).
    """

    B0: float
    b_prime: float
    b_dprime: float = 0.0
    cross_terms: bool = False

    def __post_init__(self):
        if not self.B0 > 0:
            raise DomainError("B0 must be > 0")
        if not self.b_prime > 0:
            raise DomainError("b_prime must be > 0")
        if not self.b_dprime >= 0:
            raise DomainError("b_dprime must be >= 0")

    @classmethod
    def from_lab_units(cls, B0_gauss, b_prime_gauss_per_cm, b_dprime_gauss_per_cm2=0.0, cross_terms=False):
        return cls(
            B0=B0_gauss * GAUSS,
            b_prime=b_prime_gauss_per_cm * GAUSS_PER_CM,
            b_dprime=b_dprime_gauss_per_cm2 * GAUSS_PER_CM2,
            cross_terms=cross_terms,
        )

    def vector(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        x, y, z = r[..., 0], r[..., 1], r[..., 2]
        c = 1.0 if self.cross_terms else 0.0
        half_bpp = 0.5 * self.b_dprime
        bx = self.B0 + half_bpp * (x * x - 0.5 * (y * y + z * z))
        by = -self.b_prime * y - c * half_bpp * x * y
        bz = self.b_prime * z - c * half_bpp * x * z
        return np.stack([bx, by, bz], axis=-1)

    def norm(self, r) -> np.ndarray:
        return np.linalg.norm(self.vector(r), axis=-1)

    def norm_and_gradient(self, r):
        """|B| and its gradient (T, T/m); no box check."""
        r = np.asarray(r, dtype=float)
        x, y, z = r[..., 0], r[..., 1], r[..., 2]
        c = 1.0 if self.cross_terms else 0.0
        bp, bpp = self.b_prime, self.b_dprime
        bx = self.B0 + 0.5 * bpp * (x * x - 0.5 * (y * y + z * z))
        by = -bp * y - c * 0.5 * bpp * x * y
        bz = bp * z - c * 0.5 * bpp * x * z
        norm = np.sqrt(bx * bx + by * by + bz * bz)
        gx = bx * bpp * x - c * 0.5 * bpp * (by * y + bz * z)
        gy = -0.5 * bpp * bx * y - by * (bp + c * 0.5 * bpp * x)
        gz = -0.5 * bpp * bx * z + bz * (bp - c * 0.5 * bpp * x)
        grad = np.stack([gx, gy, gz], axis=-1) / norm[..., None]
        return norm, grad

    def harmonic_frequencies(self, mF: int = 2, constants: PhysicalConstants = RB87):
        """(omega_x, omega_radial) of the bare trap bottom for state mF."""
        mu = constants.g_F * mF * constants.mu_B
        wx2 = mu * self.b_dprime / constants.m_atom
        wr2 = mu / constants.m_atom * (self.b_prime**2 / self.B0 - 0.5 * self.b_dprime)
        return float(np.sqrt(wx2)), float(np.sqrt(wr2))


def field_norm(field: IoffePritchardField, r) -> np.ndarray:
    """|B(r)| in tesla, with validity-box check."""
    check_in_box(r)
    return field.norm(r)


@dataclass(frozen=True)
class TrapPotential:
    """Bare magnetic potential per unit m_F, measured from the trap bottom."""

    field: IoffePritchardField
    constants: PhysicalConstants = RB87

    @property
    def mu(self) -> float:
        return self.constants.g_F * self.constants.mu_B

    @property
    def V0(self) -> float:
        return self.mu * self.field.B0

    def value(self, r) -> np.ndarray:
        return self.mu * (self.field.norm(r) - self.field.B0)

    def value_and_gradient(self, r):
        norm, grad = self.field.norm_and_gradient(r)
        return self.mu * (norm - self.field.B0), self.mu * grad


def trap_potential(trap: TrapPotential, r) -> np.ndarray:
    """V_trap(r) = g_F mu_B (|B(r)| - B0) in joules, with validity-box check."""
    check_in_box(r)
    return trap.value(r)


def calibrate_ip_from_quic(omega_x, omega_radial, B0, mF=2, constants: PhysicalConstants = RB87):
    """Build the IP field whose bare trap bottom has the given frequencies for state mF.

    b'' follows from omega_x alone; b' then from
    omega_radial^2 = (g_F mF mu_B / m) (b'^2/B0 - b''/2).
    """
    if not (omega_x > 0 and omega_radial > 0 and B0 > 0):
        raise DomainError("frequencies and B0 must be positive")
    if mF not in (1, 2):
        raise DomainError(f"mF = {mF} is not a trapped state (expected 1 or 2)")
    mu = constants.g_F * mF * constants.mu_B
    m = constants.m_atom
    b_dprime = m * omega_x**2 / mu
    b_prime_sq = B0 * (m * omega_radial**2 / mu + 0.5 * b_dprime)
    if b_prime_sq <= 0:
        raise CalibrationError(f"omega_radial = {omega_radial:.4g} rad/s infeasible for B0 = {B0:.4g} T")
    return IoffePritchardField(B0=B0, b_prime=float(np.sqrt(b_prime_sq)), b_dprime=b_dprime)


def reference_quic_field(constants: PhysicalConstants = RB87) -> IoffePritchardField:
    """QUIC field used throughout: B0 = 1.8 G, b' = 225 G/cm, b'' from omega_x/2pi = 21 Hz."""
    b_dprime = constants.m_atom * (2 * np.pi * 21.0) ** 2 / (2 * constants.g_F * constants.mu_B)
    return IoffePritchardField(B0=1.8 * GAUSS, b_prime=225 * GAUSS_PER_CM, b_dprime=b_dprime)
