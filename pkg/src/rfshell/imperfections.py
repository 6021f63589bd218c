"""rf-source imperfections and the heating they cause.

Conventions: power spectral densities are one-sided, per Hz of ordinary
frequency. A white noise held constant over steps of length dt with standard
deviation sigma has one-sided PSD 2 sigma^2 dt below 1/dt.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .dressed import DressedPotential
from .dynamics import CloudState, cloud_statistics, integrate_ensemble
from .errors import DomainError
from .field import RB87, PhysicalConstants
from .schedule import NoiseTrack, RfSchedule, Segment

FWHM_PER_SIGMA = 2 * np.sqrt(2 * np.log(2))
PSD_CONVENTION = "one-sided PSD per Hz"


@dataclass(frozen=True)
class FrequencyNoiseModel:
    """rf frequency noise delta_f(t) in Hz.

    kind "white": ``psd`` is the one-sided level in Hz^2/Hz.
    kind "ou": Ornstein-Uhlenbeck with stationary ``variance`` (Hz^2) and
    ``correlation_time`` (s).
    """

    kind: str = "white"
    psd: float = 0.0
    variance: float = 0.0
    correlation_time: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("white", "ou"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if self.psd < 0 or self.variance < 0:
            raise DomainError("noise level must be >= 0")
        if not self.correlation_time > 0:
            raise DomainError("correlation time must be > 0")

    @property
    def is_zero(self):
        return (self.psd if self.kind == "white" else self.variance) == 0

    def sigma(self, dt) -> float:
        """Standard deviation of one sample at spacing dt."""
        if self.kind == "white":
            return float(np.sqrt(self.psd / (2 * dt)))
        return float(np.sqrt(self.variance))

    def psd_at(self, f) -> float:
        if self.kind == "white":
            return self.psd
        tau = self.correlation_time
        return 4 * self.variance * tau / (1 + (2 * np.pi * f * tau) ** 2)

    def sample(self, n, dt) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.kind == "white":
            return self.sigma(dt) * rng.standard_normal(n)
        # exact OU update, started in the stationary distribution
        a = np.exp(-dt / self.correlation_time)
        s = self.sigma(dt)
        xi = rng.standard_normal(n)
        out = np.empty(n)
        x = s * xi[0]
        out[0] = x
        b = s * np.sqrt(1 - a * a)
        for k in range(1, n):
            x = a * x + b * xi[k]
            out[k] = x
        return out


def calibrate_to_fwhm(fwhm_hz, dt, kind="white", correlation_time=1.0, seed=0) -> FrequencyNoiseModel:
    """Noise model whose sample histogram (step dt) has the given FWHM."""
    sigma = fwhm_hz / FWHM_PER_SIGMA
    if kind == "white":
        return FrequencyNoiseModel("white", psd=2 * sigma**2 * dt, seed=seed)
    return FrequencyNoiseModel("ou", variance=sigma**2, correlation_time=correlation_time, seed=seed)


def histogram_fwhm(samples, bins=None) -> float:
    """Full width at half maximum of the sample histogram, with linear interpolation at the edges."""
    samples = np.asarray(samples, dtype=float)
    if bins is None:
        bins = max(20, int(np.sqrt(samples.size) / 2))
    counts, edges = np.histogram(samples, bins=bins)
    # light smoothing against shot noise in the peak bin
    kernel = np.array([1, 2, 3, 2, 1], float)
    smooth = np.convolve(counts, kernel / kernel.sum(), mode="same")
    centers = 0.5 * (edges[1:] + edges[:-1])
    half = smooth.max() / 2
    above = np.nonzero(smooth >= half)[0]
    i, j = above[0], above[-1]

    def cross(a, b):
        ya, yb = smooth[a], smooth[b]
        return centers[a] + (half - ya) * (centers[b] - centers[a]) / (yb - ya)

    left = cross(i - 1, i) if i > 0 else centers[0]
    right = cross(j, j + 1) if j < len(centers) - 1 else centers[-1]
    return float(right - left)


def decorate_schedule_with_noise(schedule: RfSchedule, noise: FrequencyNoiseModel, dt) -> RfSchedule:
    """omega_rf(t) -> omega_rf(t) + 2 pi delta_f(t), delta_f held over steps of dt."""
    if noise.is_zero:
        return schedule
    n = int(np.ceil(schedule.duration / dt)) + 1
    track = NoiseTrack(schedule.t_start, dt, noise.sample(n, dt), t_stop=schedule.t_end)
    return replace(schedule, noise=schedule.noise + (track,))


@dataclass(frozen=True)
class StaircaseSpec:
    f_start: float  # Hz
    f_end: float  # Hz
    n_steps: int
    duration: float  # s

    def __post_init__(self):
        if self.n_steps < 1:
            raise DomainError("n_steps must be >= 1")
        if not self.duration > 0:
            raise DomainError("duration must be > 0")

    @property
    def step_height(self):
        return (self.f_end - self.f_start) / self.n_steps


def staircase_schedule(spec: StaircaseSpec, Omega, t0=0.0) -> RfSchedule:
    """Equal treads; each tread sits at the mid value of the linear ramp it replaces."""
    seg = Segment(t0, t0 + spec.duration, "staircase", 2 * np.pi * spec.f_start, 2 * np.pi * spec.f_end,
                  Omega, Omega, n_steps=spec.n_steps)
    return RfSchedule((seg,))


def phase_jump_schedule(sched_a: RfSchedule, sched_b: RfSchedule, t_switch, jump) -> RfSchedule:
    """sched_a up to t_switch, then sched_b (moved to start at t_switch) with its phase offset by ``jump``."""
    if not sched_a.t_start < t_switch <= sched_a.t_end:
        raise DomainError("t_switch outside the first schedule")
    head = sched_a.truncated(t_switch)
    tail = sched_b.shifted(t_switch - sched_b.t_start)
    base = head.segments[-1].phase
    segs = tuple(replace(s, phase=base + jump + s.phase - tail.segments[0].phase) for s in tail.segments)
    return RfSchedule(head.segments + segs, head.noise + tail.noise)


def position_sensitivity(alpha, constants: PhysicalConstants = RB87) -> float:
    """dz0/df = h/alpha (m per Hz of rf frequency)."""
    if not alpha > 0:
        raise DomainError("alpha must be > 0")
    return constants.h / alpha


def heating_rate_from_position_noise(S_z, omega_trans, constants: PhysicalConstants = RB87) -> float:
    """Energy growth per particle (W) for trap-position noise: m omega^4 S_z(omega) / 4."""
    if S_z < 0:
        raise DomainError("S_z must be >= 0")
    return constants.m_atom * omega_trans**4 * S_z / 4


def position_psd_for_heating(E_dot, omega_trans, constants: PhysicalConstants = RB87) -> float:
    """Inverse of heating_rate_from_position_noise."""
    return 4 * E_dot / (constants.m_atom * omega_trans**4)


def frequency_psd_for_position_psd(S_z, alpha, constants: PhysicalConstants = RB87) -> float:
    return S_z / position_sensitivity(alpha, constants) ** 2


@dataclass(frozen=True)
class HeatingTrace:
    times: np.ndarray
    temperatures: np.ndarray  # (n_t, 3), K, averaged over realizations
    rates: np.ndarray  # K/s per axis
    rate_errors: np.ndarray  # one standard error, K/s
    surviving: np.ndarray
    realization_rates: np.ndarray  # (n_realizations, 3)


def _per_particle_rates(times, kinetic, weights):
    """Weighted mean and standard error of per-particle slopes of m v_i^2 / k_B."""
    t = times - times.mean()
    slopes = np.tensordot(t, kinetic - kinetic.mean(axis=0), axes=(0, 0)) / np.sum(t * t)  # (n, 3)
    p = weights / weights.sum()
    mean = p @ slopes
    n_eff = weights.sum() ** 2 / np.sum(weights**2)
    var = p @ (slopes - mean) ** 2
    return mean, np.sqrt(var / n_eff)


def _holding_run(cloud, dressed, noise, t_hold, dt, n_samples, threads):
    c = dressed.constants
    t0 = cloud.time
    sched = RfSchedule.constant(dressed.drive.omega_rf, dressed.Omega, t_hold, t0=t0)
    sched = decorate_schedule_with_noise(sched, noise, dt)
    n_total = int(round(t_hold / dt))
    stride = max(1, n_total // (n_samples - 1))
    out, snaps = integrate_ensemble(cloud, dressed, sched, dt, t0 + t_hold, threads=threads,
                                    snapshot_stride=stride)
    states = [(t0, cloud.velocities, cloud.weights)] + [(s.time, s.velocities, s.weights) for s in snaps]
    times = np.array([s[0] for s in states])
    kin = np.stack([c.m_atom * s[1] ** 2 / c.k_B for s in states])  # (n_t, n, 3)
    temps = np.array([cloud_statistics(CloudState(cloud.positions, v, w), c).temperature for _, v, w in states])
    surv = np.array([w.sum() / len(w) for _, _, w in states])
    rates, errs = _per_particle_rates(times, kin, out.weights)
    return times, temps, surv, rates, errs


def simulate_holding_heating(cloud: CloudState, dressed: DressedPotential, noise: FrequencyNoiseModel, t_hold,
                             dt, n_samples=41, realizations=1, threads=1) -> HeatingTrace:
    """Per-axis temperatures while holding at the dressed evaluator's drive with rf frequency noise.

    Each realization draws an independent noise path (seeds spawned from
    ``noise.seed``) and is shared by every particle of the cloud. Rates are
    weighted means of per-particle slopes of m v_i^2 / k_B. With several
    realizations the error is the spread between them, which includes the
    realization-to-realization scatter of the noise power near the trap
    frequency; with one it is the per-particle standard error.
    """
    if realizations < 1:
        raise DomainError("realizations must be >= 1")
    seeds = np.random.SeedSequence(noise.seed).generate_state(realizations) if realizations > 1 else [noise.seed]
    runs = [_holding_run(cloud, dressed, replace(noise, seed=int(s)), t_hold, dt, n_samples, threads)
            for s in seeds]
    times = runs[0][0]
    temps = np.mean([r[1] for r in runs], axis=0)
    surv = np.mean([r[2] for r in runs], axis=0)
    per = np.array([r[3] for r in runs])
    if realizations > 1:
        errs = per.std(axis=0, ddof=1) / np.sqrt(realizations)
    else:
        errs = runs[0][4]
    return HeatingTrace(times, temps, per.mean(axis=0), errs, surv, per)


def simulate_oscillator_position_noise(omega, S_z, dt, t_total, n_real, seed=0, constants: PhysicalConstants = RB87):
    """Brute-force 1D harmonic oscillator whose centre jitters as white noise of one-sided PSD S_z.

    The centre is held for each step and the motion is propagated exactly about
    it, so this path shares no integrator with the ensemble code. Returns
    (times, mean energy per realisation) starting from rest at the origin.
    """
    m = constants.m_atom
    n_steps = int(round(t_total / dt))
    sigma = np.sqrt(S_z / (2 * dt))
    rng = np.random.default_rng(seed)
    x = np.zeros(n_real)
    u = np.zeros(n_real)  # v / omega
    cs, sn = np.cos(omega * dt), np.sin(omega * dt)
    energies = np.empty(n_steps + 1)
    energies[0] = 0.0
    for k in range(n_steps):
        eps = sigma * rng.standard_normal(n_real)
        d = x - eps
        x = eps + d * cs + u * sn
        u = -d * sn + u * cs
        energies[k + 1] = 0.5 * m * omega**2 * np.mean(x * x + u * u)
    return np.arange(n_steps + 1) * dt, energies


def fitted_rate(times, values):
    fit = stats.linregress(times, values)
    return fit.slope, fit.stderr
