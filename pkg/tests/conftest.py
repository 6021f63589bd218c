import numpy as np
import pytest

from rfshell import RB87, DressedPotential, TrapPotential, reference_quic_field

TWO_PI = 2 * np.pi
MHZ = TWO_PI * 1e6
KHZ = TWO_PI * 1e3


@pytest.fixture(scope="session")
def trap():
    return TrapPotential(reference_quic_field())


@pytest.fixture(scope="session")
def linear_trap():
    """Pure IP gradient trap without axial curvature."""
    from rfshell import IoffePritchardField
    return TrapPotential(IoffePritchardField.from_lab_units(1.8, 225.0, 0.0))


@pytest.fixture(scope="session")
def resonance_set(trap):
    """Delta/2pi = 2 MHz, Omega/2pi = 180 kHz, m_F = 2 with gravity."""
    return DressedPotential.from_detuning(trap, 2 * MHZ, 180 * KHZ)


def alpha_225():
    return RB87.g_F * RB87.mu_B * 225e-2
