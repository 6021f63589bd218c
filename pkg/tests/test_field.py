import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfshell import (
    RB87,
    CalibrationError,
    DomainError,
    IoffePritchardField,
    PhysicalConstants,
    TrapPotential,
    calibrate_ip_from_quic,
    field_norm,
    trap_potential,
)
from rfshell.field import GAUSS

TWO_PI = 2 * np.pi
coord_x = st.floats(-1e-2, 1e-2)
coord_rho = st.floats(-3.5e-3, 3.5e-3)


def test_constants_invariants():
    c = RB87
    assert abs(c.h / (TWO_PI * c.hbar) - 1) < 1e-12
    # 0.70 MHz/G for g_F = 1/2
    assert abs(c.zeeman_hz_per_tesla * GAUSS / 0.70e6 - 1) < 0.01
    with pytest.raises(DomainError):
        PhysicalConstants(m_atom=-1.0)


def test_norm_at_origin_is_offset():
    f = IoffePritchardField.from_lab_units(1.8, 225.0, 270.0)
    assert field_norm(f, [0, 0, 0]) == pytest.approx(1.8 * GAUSS, rel=1e-15)


def test_norm_hand_evaluation():
    f = IoffePritchardField.from_lab_units(1.8, 225.0, 0.0)
    expected = np.sqrt(1.8**2 + (225 * 0.045) ** 2) * GAUSS
    assert field_norm(f, [0, 0, -450e-6]) == pytest.approx(expected, rel=1e-12)
    assert expected / GAUSS == pytest.approx(10.28, abs=0.01)


def test_asymptotic_slope():
    f = IoffePritchardField.from_lab_units(1.8, 225.0, 0.0)
    z, h = -2e-3, 1e-6
    slope = (field_norm(f, [0, 0, z - h]) - field_norm(f, [0, 0, z + h])) / (2 * h)
    assert slope == pytest.approx(225e-2, rel=0.01)


def test_box_errors_name_coordinate():
    f = IoffePritchardField.from_lab_units(1.8, 225.0)
    with pytest.raises(DomainError, match="x ="):
        field_norm(f, [2e-2, 0, 0])
    with pytest.raises(DomainError, match="rho"):
        field_norm(f, [0, 4e-3, -4e-3])


def test_field_parameters_validated():
    with pytest.raises(DomainError):
        IoffePritchardField(B0=0.0, b_prime=1.0)
    with pytest.raises(DomainError):
        IoffePritchardField(B0=1e-4, b_prime=-1.0)
    with pytest.raises(DomainError):
        IoffePritchardField(B0=1e-4, b_prime=1.0, b_dprime=-1.0)


def test_trap_potential_values(trap):
    assert trap_potential(trap, [0, 0, 0]) == 0.0
    assert trap.V0 / RB87.h / 1e6 == pytest.approx(1.26, abs=0.005)
    # 9.574 G above the bottom corresponds to 6.70 MHz
    assert RB87.zeeman_hz_per_tesla * 9.574 * GAUSS / 1e6 == pytest.approx(6.70, abs=0.005)


@settings(max_examples=10, deadline=None)
@given(coord_x, coord_rho, coord_rho, st.booleans())
def test_gradient_matches_finite_difference(x, y, z, cross):
    f = IoffePritchardField.from_lab_units(1.8, 225.0, 270.9, cross_terms=cross)
    r = np.array([x, y, z])
    _, g = f.norm_and_gradient(r)
    h = 1e-7
    fd = np.array([(f.norm(r + h * e) - f.norm(r - h * e)) / (2 * h) for e in np.eye(3)])
    scale = np.linalg.norm(g) + 1e-3  # T/m floor for points where the gradient vanishes
    assert np.max(np.abs(fd - g)) / scale < 1e-6


@settings(max_examples=200, deadline=None)
@given(coord_x, coord_rho, coord_rho)
def test_potential_nonnegative_and_symmetric(trap, x, y, z):
    v = trap_potential(trap, [x, y, z])
    assert v >= 0
    assert trap_potential(trap, [x, -y, z]) == pytest.approx(v, rel=1e-12, abs=1e-40)
    assert trap_potential(trap, [x, y, -z]) == pytest.approx(v, rel=1e-12, abs=1e-40)


@settings(max_examples=200, deadline=None)
@given(st.floats(-4e-3, -1e-5))
def test_asymptotic_gradient_property(z):
    f = IoffePritchardField.from_lab_units(1.8, 225.0, 0.0)
    trap = TrapPotential(f)
    if abs(z) < 10 * f.B0 / f.b_prime:
        return
    _, g = trap.value_and_gradient(np.array([0, 0, z]))
    assert abs(g[2]) == pytest.approx(trap.mu * f.b_prime, rel=0.005)


def test_calibration_examples():
    m, mu_B = RB87.m_atom, RB87.mu_B
    f = calibrate_ip_from_quic(TWO_PI * 21.0, TWO_PI * 200.0, 1.8 * GAUSS, mF=2)
    # 1 T/m^2 = 1 G/cm^2; g_F m_F = 1
    assert f.b_dprime == pytest.approx(m * (TWO_PI * 21) ** 2 / mu_B, rel=1e-12)
    assert f.b_dprime == pytest.approx(270.9, abs=0.1)
    assert f.b_prime / 1e-2 == pytest.approx(211, abs=0.5)
    wx, wr = f.harmonic_frequencies(2)
    assert wx == pytest.approx(TWO_PI * 21.0, rel=1e-12)
    assert wr == pytest.approx(TWO_PI * 200.0, rel=1e-3)


def test_forward_radial_frequency(trap):
    _, wr = trap.field.harmonic_frequencies(2)
    assert wr / TWO_PI == pytest.approx(213, abs=0.5)


def test_harmonic_expansion_matches_curvature(trap):
    """Numerical curvature of V_trap at the origin against the closed-form frequencies."""
    wx, wr = trap.field.harmonic_frequencies(2)
    h = np.array([1e-5, 1e-6, 1e-6])
    for axis, w in ((0, wx), (1, wr), (2, wr)):
        e = np.eye(3)[axis] * h[axis]
        curv = (trap.value(e) + trap.value(-e)) / h[axis] ** 2  # V(0) = 0
        assert np.sqrt(2 * curv / RB87.m_atom) == pytest.approx(w, rel=1e-4)


def test_calibration_errors():
    with pytest.raises(DomainError):
        calibrate_ip_from_quic(TWO_PI * 21, TWO_PI * 200, 1.8 * GAUSS, mF=0)
    with pytest.raises(DomainError):
        calibrate_ip_from_quic(-1.0, TWO_PI * 200, 1.8 * GAUSS)
    assert issubclass(CalibrationError, Exception)


def test_cross_terms_break_x_parity():
    f = IoffePritchardField.from_lab_units(1.8, 225.0, 270.9, cross_terms=True)
    r = np.array([1e-3, 2e-4, -3e-4])
    assert f.norm(r) != pytest.approx(f.norm(r * [-1, 1, 1]), rel=1e-9)
    g = IoffePritchardField.from_lab_units(1.8, 225.0, 270.9)
    assert g.norm(r) == pytest.approx(g.norm(r * [-1, 1, 1]), rel=1e-14)


def test_maxwell_form_is_divergence_and_curl_free():
    f = IoffePritchardField.from_lab_units(1.8, 225.0, 270.9, cross_terms=True)
    r = np.array([1e-3, 2e-4, -3e-4])
    h = 1e-6
    J = np.array([(f.vector(r + h * e) - f.vector(r - h * e)) / (2 * h) for e in np.eye(3)]).T
    assert abs(np.trace(J)) < 1e-6
    assert np.max(np.abs(J - J.T)) < 1e-6
