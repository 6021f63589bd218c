"""Static estimates for a degenerate gas in the shell trap."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .field import RB87, PhysicalConstants

TF_VALIDITY = 10.0  # N a_s / a_bar below this and the Thomas-Fermi limit is doubtful
SEMICLASSICAL_MIN_N = 10


@dataclass(frozen=True)
class GasSpec:
    N: float
    omega_1: float
    omega_2: float
    omega_3: float
    T: float | None = None
    constants: PhysicalConstants = RB87

    def __post_init__(self):
        if not self.N >= 1:
            raise DomainError("N must be >= 1")
        if min(self.omega_1, self.omega_2, self.omega_3) <= 0:
            raise DomainError("trap frequencies must be > 0")
        if self.T is not None and self.T < 0:
            raise DomainError("T must be >= 0")

    @classmethod
    def from_hz(cls, N, f1, f2, f3, T=None, constants=RB87):
        return cls(N, 2 * np.pi * f1, 2 * np.pi * f2, 2 * np.pi * f3, T, constants)

    @property
    def omega_bar(self) -> float:
        return float(np.cbrt(self.omega_1 * self.omega_2 * self.omega_3))

    @property
    def a_bar(self) -> float:
        c = self.constants
        return float(np.sqrt(c.hbar / (c.m_atom * self.omega_bar)))


def tf_chemical_potential(spec: GasSpec) -> float:
    """Thomas-Fermi chemical potential (J) for N atoms in the harmonic trap."""
    c = spec.constants
    ratio = spec.N * c.a_s / spec.a_bar
    if ratio < TF_VALIDITY:
        warnings.warn(f"N a_s / a_bar = {ratio:.3g}: Thomas-Fermi limit not reached", RuntimeWarning, stacklevel=2)
    return 0.5 * c.hbar * spec.omega_bar * (15 * ratio) ** 0.4


def critical_temperature(spec: GasSpec) -> float:
    """Ideal-gas condensation temperature (K), no finite-size or interaction shift."""
    if spec.N < SEMICLASSICAL_MIN_N:
        warnings.warn(f"N = {spec.N:g}: semiclassical estimate unreliable", RuntimeWarning, stacklevel=2)
    c = spec.constants
    return c.hbar * spec.omega_bar / c.k_B * (spec.N / c.zeta3) ** (1 / 3)


@dataclass(frozen=True)
class DimensionalityReport:
    mu: float  # J
    T: float  # K
    hbar_omega_trans: float  # J
    k_B_T: float  # J
    thermal_2d: bool
    bec_2d: bool


def dimensionality_report(spec: GasSpec, omega_trans) -> DimensionalityReport:
    """2D flags: thermal_2d iff k_B T < hbar omega_trans, bec_2d iff mu < hbar omega_trans.

    When spec.T is unset the gas is taken at its critical temperature.
    """
    c = spec.constants
    mu = tf_chemical_potential(spec)
    T = critical_temperature(spec) if spec.T is None else spec.T
    e_trans = c.hbar * omega_trans
    kT = c.k_B * T
    return DimensionalityReport(mu, T, e_trans, kT, bool(kT < e_trans), bool(mu < e_trans))
