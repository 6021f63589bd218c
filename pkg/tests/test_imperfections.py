import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from rfshell import (
    RB87,
    DomainError,
    FrequencyNoiseModel,
    RfSchedule,
    StaircaseSpec,
    calibrate_to_fwhm,
    characterize,
    decorate_schedule_with_noise,
    heating_rate_from_position_noise,
    phase_jump_schedule,
    position_sensitivity,
    sample_shell_cloud,
    simulate_holding_heating,
    staircase_schedule,
)
from rfshell.imperfections import (
    FWHM_PER_SIGMA,
    fitted_rate,
    frequency_psd_for_position_psd,
    histogram_fwhm,
    position_psd_for_heating,
    simulate_oscillator_position_noise,
)

TWO_PI = 2 * np.pi
c = RB87
ALPHA_225 = c.g_F * c.mu_B * 2.25
DT = 1 / (100 * 600.0)  # integrator step at a 600 Hz transverse frequency


@pytest.mark.parametrize("fwhm", [8.0, 100.0])
@pytest.mark.parametrize("kind", ["white", "ou"])
def test_calibrated_fwhm_over_one_second(fwhm, kind):
    noise = calibrate_to_fwhm(fwhm, DT, kind=kind, correlation_time=1e-3, seed=21)
    x = noise.sample(int(round(1.0 / DT)), DT)
    assert histogram_fwhm(x) == pytest.approx(fwhm, rel=0.10)
    # independent estimate: Gaussian FWHM from the sample standard deviation
    assert FWHM_PER_SIGMA * x.std() == pytest.approx(fwhm, rel=0.10)


def test_white_noise_one_sided_psd():
    noise = FrequencyNoiseModel("white", psd=3.0, seed=5)
    x = noise.sample(2**18, DT)
    f, p = signal.welch(x, fs=1 / DT, nperseg=4096)
    band = (f > 100) & (f < 0.3 / DT)
    assert np.mean(p[band]) == pytest.approx(3.0, rel=0.05)


def test_ou_statistics():
    tau = 2e-3
    noise = FrequencyNoiseModel("ou", variance=25.0, correlation_time=tau, seed=3)
    x = noise.sample(400_000, DT)
    assert x.var() == pytest.approx(25.0, rel=0.05)
    lag = int(round(tau / DT))
    r = np.corrcoef(x[:-lag], x[lag:])[0, 1]
    assert r == pytest.approx(np.exp(-1), abs=0.02)
    f, p = signal.welch(x, fs=1 / DT, nperseg=8192)
    band = (f > 20) & (f < 300)
    assert np.mean(p[band] / noise.psd_at(f[band])) == pytest.approx(1.0, rel=0.08)


def test_noise_model_validation():
    with pytest.raises(DomainError):
        FrequencyNoiseModel("pink")
    with pytest.raises(DomainError):
        FrequencyNoiseModel("white", psd=-1.0)
    with pytest.raises(DomainError):
        FrequencyNoiseModel("ou", variance=1.0, correlation_time=0.0)


def test_zero_noise_leaves_schedule_unchanged():
    s = RfSchedule.constant(TWO_PI * 3e6, TWO_PI * 1e5, 0.1)
    assert decorate_schedule_with_noise(s, FrequencyNoiseModel("white", psd=0.0), DT) is s
    assert decorate_schedule_with_noise(s, FrequencyNoiseModel("ou", variance=0.0), DT) is s


def test_decorated_schedule_noise_mean():
    s = RfSchedule.constant(TWO_PI * 3e6, TWO_PI * 1e5, 1.0)
    noise = calibrate_to_fwhm(100.0, DT, seed=8)
    d = decorate_schedule_with_noise(s, noise, DT)
    t = (np.arange(int(1.0 / DT)) + 0.5) * DT
    df = (d.omega_rf(t) - s.omega_rf(t)) / TWO_PI
    assert abs(df.mean()) < 3 * df.std() / np.sqrt(df.size)
    assert FWHM_PER_SIGMA * df.std() == pytest.approx(100.0, rel=0.05)
    # the noise track adds nothing past the end of the schedule
    assert np.array_equal(d.noise[0](np.array([1.0 + DT])), [0.0])


def test_staircase_examples():
    one = staircase_schedule(StaircaseSpec(1e6, 3e6, 1, 0.15), TWO_PI * 1e5)
    t = np.linspace(0, 0.15, 7)
    assert np.allclose(one.omega_rf(t), TWO_PI * 2e6)
    spec = StaircaseSpec(1e6, 3e6, 1500, 0.15)
    assert spec.step_height == pytest.approx(1333.333, abs=1e-3)
    jump = spec.step_height * position_sensitivity(ALPHA_225)
    assert jump * 1e9 == pytest.approx(85, abs=0.5)
    with pytest.raises(DomainError):
        StaircaseSpec(1e6, 3e6, 0, 0.15)


def test_staircase_refinement_converges_to_ramp():
    spec = StaircaseSpec(1e6, 3e6, 10**6, 0.15)
    s = staircase_schedule(spec, 0.0)
    t = np.random.default_rng(0).uniform(0, 0.15, 20_000)
    linear = TWO_PI * (1e6 + 2e6 * t / 0.15)
    assert np.max(np.abs(s.omega_rf(t) - linear)) < 2 * TWO_PI * spec.step_height


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5e6, 5e6), st.floats(0.5e6, 5e6), st.integers(1, 5000), st.floats(1e-3, 1.0))
def test_staircase_properties(f0, f1, n, T):
    spec = StaircaseSpec(f0, f1, n, T)
    assert spec.step_height == (f1 - f0) / n
    s = staircase_schedule(spec, 0.0)
    treads = s.omega_rf((np.arange(n) + 0.5) * T / n) / TWO_PI
    # equal treads, so the time average is the mean of the tread values
    assert np.mean(treads) == pytest.approx(0.5 * (f0 + f1), rel=1e-12)


def test_phase_jump_schedule():
    a = RfSchedule.constant(TWO_PI * 3e6, TWO_PI * 1e5, 1.0)
    b = RfSchedule.constant(TWO_PI * 3e6, TWO_PI * 1e5, 0.5)
    s0 = phase_jump_schedule(a, b, 0.4, 0.0)
    assert s0.jumps == [] and s0.t_end == pytest.approx(0.9)
    s = phase_jump_schedule(a, b, 0.4, np.pi)
    assert s.jumps == [(0.4, np.pi)]
    before, after = s.phase([0.4 - 1e-9, 0.4 + 1e-9])
    # B1 cos(phi + theta) reverses sign across the switch
    theta = 0.37
    assert np.cos(after + theta) == pytest.approx(-np.cos(before + theta), rel=1e-12)
    with pytest.raises(DomainError):
        phase_jump_schedule(a, b, 2.0, np.pi)


def test_position_sensitivity():
    assert position_sensitivity(ALPHA_225) * 1e12 == pytest.approx(63.6, abs=0.1)  # nm/kHz
    assert position_sensitivity(2 * ALPHA_225) == pytest.approx(position_sensitivity(ALPHA_225) / 2, rel=1e-15)
    assert 8 * position_sensitivity(ALPHA_225) * 1e9 == pytest.approx(0.51, abs=0.005)
    with pytest.raises(DomainError):
        position_sensitivity(0.0)


def test_heating_rate_formula():
    w = TWO_PI * 600
    assert heating_rate_from_position_noise(0.0, w) == 0.0
    S = position_psd_for_heating(c.k_B * 5e-6, w)
    assert S == pytest.approx(1.0e-17, rel=0.05)
    assert np.sqrt(S) * 1e9 == pytest.approx(3.0, abs=0.1)  # nm/sqrt(Hz)
    assert heating_rate_from_position_noise(S, 2 * w) == pytest.approx(16 * c.k_B * 5e-6, rel=1e-12)
    assert frequency_psd_for_position_psd(S, ALPHA_225) == pytest.approx(S / (c.h / ALPHA_225) ** 2)
    with pytest.raises(DomainError):
        heating_rate_from_position_noise(-1.0, w)


def test_oscillator_oracle_without_noise_stays_at_rest():
    t, e = simulate_oscillator_position_noise(TWO_PI * 600, 0.0, 1e-5, 0.01, 10)
    assert np.all(e == 0)


def test_oscillator_oracle_short_run():
    w, S = TWO_PI * 600, 1e-17
    t, e = simulate_oscillator_position_noise(w, S, 2 * np.pi / (100 * w), 0.2, 2000, seed=1)
    slope, err = fitted_rate(t, e)
    assert slope == pytest.approx(heating_rate_from_position_noise(S, w), rel=0.15)


def test_holding_zero_noise_control(resonance_set):
    ch = characterize(resonance_set.trap, resonance_set.Delta, resonance_set.Omega)
    dt = TWO_PI / (100 * ch.omega_trans)
    cl = sample_shell_cloud(resonance_set, 1e-6, 200, seed=0)
    tr = simulate_holding_heating(cl, resonance_set, FrequencyNoiseModel("white", psd=0.0), 0.1, dt, n_samples=11)
    assert tr.temperatures.shape == (11, 3)
    assert np.all(np.abs(tr.rates) < 3 * tr.rate_errors + 1e-12)
    assert np.all(tr.surviving == 1)
