"""Classical Monte Carlo dynamics of thermal clouds in time-dependent dressed potentials.

Particles are non-interacting point masses following the adiabatic potential
of one dressed level. Non-adiabatic (Landau-Zener) losses and phase-jump
projections reduce a per-particle survival weight instead of removing
particles, so the particle count never changes.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .characterization import (
    hessian_matrix,
    local_gradient_alpha,
    resonance_height,
    shell_radius,
    transverse_frequency,
    trap_minimum,
)
from .dressed import DressedPotential, energy_and_force, mixing_angle
from .errors import DomainError, EmptyCloudError, StepSizeError
from .field import BOX_HALF_X, BOX_RHO, RB87, PhysicalConstants, TrapPotential
from .schedule import RfSchedule, Segment

log = logging.getLogger(__name__)

LOADING_SWITCH_ON = 2e-3
LOADING_CHIRP = 150e-3
LOADING_INITIAL_DETUNING = -2 * np.pi * 300e3
LOADING_CHIRP_START = 2 * np.pi * 1e6


@dataclass
class CloudState:
    """Ensemble of classical particles; arrays are (n, 3) or (n,)."""

    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray = None
    time: float = 0.0
    master_seed: int = 0
    lost: np.ndarray = None
    crossings: np.ndarray = None

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        n = len(self.positions)
        if self.positions.shape != (n, 3) or self.velocities.shape != (n, 3):
            raise DomainError("positions and velocities must both be (n, 3)")
        self.weights = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        self.lost = np.zeros(n, bool) if self.lost is None else np.asarray(self.lost, dtype=bool)
        self.crossings = np.zeros(n, np.int64) if self.crossings is None else np.asarray(self.crossings, np.int64)
        if np.any((self.weights < 0) | (self.weights > 1)):
            raise DomainError("survival weights must lie in [0, 1]")

    @property
    def n(self) -> int:
        return len(self.positions)

    def copy(self):
        return CloudState(
            self.positions.copy(),
            self.velocities.copy(),
            self.weights.copy(),
            self.time,
            self.master_seed,
            self.lost.copy(),
            self.crossings.copy(),
        )


def thermal_velocity(T, constants: PhysicalConstants = RB87) -> float:
    return float(np.sqrt(constants.k_B * T / constants.m_atom))


def sample_thermal_cloud(omega_xyz, center, T, n, seed, constants: PhysicalConstants = RB87) -> CloudState:
    """Boltzmann sample of a classical gas in a harmonic trap.

    Particle i only depends on (seed, i): the normal draws are laid out row by
    row, so the first k particles are the same whatever n is.
    """
    if not T > 0:
        raise DomainError("temperature must be > 0")
    if n < 1:
        raise DomainError("need at least one particle")
    omega = np.asarray(omega_xyz, dtype=float)
    if omega.shape != (3,) or np.any(omega <= 0):
        raise DomainError("need three positive trap frequencies")
    sv = thermal_velocity(T, constants)
    draws = np.random.default_rng(seed).standard_normal((n, 6))
    pos = np.asarray(center, dtype=float) + draws[:, :3] * (sv / omega)
    vel = draws[:, 3:] * sv
    return CloudState(pos, vel, master_seed=int(seed))


def sample_shell_cloud(dressed: DressedPotential, T, n, seed, sweeps=60, inflate=1.5) -> CloudState:
    """Boltzmann sample of the dressed potential near the bottom of the shell.

    A Gaussian in a trap-following frame (x, azimuth about the x axis, distance
    from the x axis measured from the resonant shell) is used as an
    independence Metropolis-Hastings proposal, so curvature and anharmonicity
    of the shell are sampled exactly after enough sweeps.
    """
    if not T > 0 or n < 1:
        raise DomainError("need T > 0 and n >= 1")
    c = dressed.constants
    trap, Delta = dressed.trap, dressed.Delta
    r_min = trap_minimum(dressed)
    H = hessian_matrix(dressed, r_min)
    w = np.sqrt(np.maximum(np.diag(H), 0) / c.m_atom)
    if np.any(w <= 0):
        raise DomainError("shell bottom not confining in all directions")
    sv = thermal_velocity(T, c)
    rho_min = np.hypot(r_min[1], r_min[2])
    t0, _ = shell_radius(trap, Delta, [[0.0, 0.0, -1.0]], origin=[r_min[0], 0.0, 0.0])
    offset = rho_min - t0[0]
    sx, sphi, srho = inflate * sv / w[0], inflate * sv / (w[1] * rho_min), inflate * sv / w[2]
    kT = c.k_B * T

    ss = np.random.SeedSequence(seed)
    g_prop, g_acc, g_vel = (np.random.default_rng(s) for s in ss.spawn(3))
    z = g_prop.standard_normal((n, sweeps + 1, 3))
    acc_u = g_acc.random((n, sweeps))
    vel = g_vel.standard_normal((n, 3)) * sv

    def propose(k):
        x = r_min[0] + sx * z[:, k, 0]
        phi = sphi * z[:, k, 1]
        u = np.stack([np.zeros(n), np.sin(phi), -np.cos(phi)], axis=-1)
        origin = np.stack([x, np.zeros(n), np.zeros(n)], axis=-1)
        rho_shell, ok = shell_radius(trap, Delta, u, origin)
        rho = np.where(ok, rho_shell, rho_min) + offset + srho * z[:, k, 2]
        pos = origin + rho[:, None] * u
        ok &= (rho > 0) & (np.abs(x) <= BOX_HALF_X) & (rho <= BOX_RHO) & (np.abs(phi) < np.pi)
        U = dressed.total(pos)
        # log q in (x, phi, rho) up to a constant; Cartesian density picks up 1/rho
        log_q = -0.5 * np.sum(z[:, k] ** 2, axis=1) - np.log(np.where(ok, rho, 1.0))
        log_w = np.where(ok, -(U - U_ref) / kT - log_q, -np.inf)
        return pos, log_w

    U_ref = float(dressed.total(r_min))
    pos, log_w = propose(0)
    accepted = 0
    for k in range(1, sweeps + 1):
        new, new_log_w = propose(k)
        with np.errstate(invalid="ignore"):
            take = np.log(acc_u[:, k - 1]) < new_log_w - log_w
        take |= np.isinf(log_w) & np.isfinite(new_log_w)
        pos[take] = new[take]
        log_w[take] = new_log_w[take]
        accepted += np.count_nonzero(take)
    log.debug("shell sampler acceptance %.3f", accepted / (n * sweeps))
    if np.any(np.isinf(log_w)):
        raise DomainError("shell sampler failed to place every particle inside the validity box")
    return CloudState(pos, vel, master_seed=int(seed))


def build_loading_schedule(delta_target, Omega_max, trap: TrapPotential,
                           switch_on=LOADING_SWITCH_ON, chirp=LOADING_CHIRP,
                           initial_detuning=LOADING_INITIAL_DETUNING,
                           chirp_start=LOADING_CHIRP_START, staircase_steps=0) -> RfSchedule:
    """rf switch-on below resonance, then a linear chirp to V0/hbar + delta_target.

    Segment 1: omega_rf fixed at V0/hbar + initial_detuning, Omega ramped 0 -> Omega_max.
    Segment 2: omega_rf from chirp_start to V0/hbar + delta_target at Omega_max,
    optionally as a staircase with ``staircase_steps`` treads.
    """
    hbar = trap.constants.hbar
    w0 = trap.V0 / hbar
    if not 0 < delta_target <= 2 * np.pi * 10e6:
        raise DomainError(f"delta_target/2pi = {delta_target / 2 / np.pi:.4g} Hz outside (0, 10 MHz]")
    w_final = w0 + delta_target
    if w_final <= w0:
        raise DomainError("target rf frequency below the trap-centre resonance")
    w_init = w0 + initial_detuning
    seg1 = Segment(0.0, switch_on, "linear", w_init, w_init, 0.0, Omega_max)
    kind = "staircase" if staircase_steps else "linear"
    seg2 = Segment(switch_on, switch_on + chirp, kind, chirp_start, w_final, Omega_max, Omega_max,
                   n_steps=int(staircase_steps))
    return RfSchedule((seg1, seg2))


def landau_zener_exponent(v_normal, alpha, Omega, constants: PhysicalConstants = RB87):
    """pi hbar Omega^2 / (2 alpha |v|); P_na = exp(-exponent) for one two-level crossing."""
    v = np.abs(np.asarray(v_normal, dtype=float))
    with np.errstate(divide="ignore"):
        return np.pi * constants.hbar * Omega**2 / (2 * alpha * v)


def landau_zener_survival(v_normal, alpha, Omega, constants: PhysicalConstants = RB87, n_crossings=4):
    """Probability that the stretched state stays adiabatic through one shell crossing.

    For a spin F rotated non-adiabatically, the stretched-state population is
    (1 - P_na)^(2F) with P_na the spin-1/2 Landau-Zener probability; F = 2 gives
    the default exponent 4.
    """
    if np.any(np.asarray(alpha) <= 0):
        raise DomainError("alpha must be > 0")
    p_na = np.exp(-landau_zener_exponent(v_normal, alpha, Omega, constants))
    return (1.0 - p_na) ** n_crossings


def phase_jump_retention(Delta_local, Omega, jump, n_crossings=4):
    """Stretched-state population kept when the rf phase jumps by ``jump``.

    The effective rotating-frame field turns by ``jump`` about the local static
    field; its direction changes by gamma with cos(gamma) = cos^2(theta) +
    sin^2(theta) cos(jump), and a spin-F stretched state keeps cos^(4F)(gamma/2).
    """
    cos_t, sin_t = mixing_angle(Delta_local, Omega)
    cos_g = cos_t**2 + sin_t**2 * np.cos(jump)
    return np.clip(0.5 * (1 + cos_g), 0.0, 1.0) ** n_crossings


def max_transverse_frequency(trap: TrapPotential, schedule: RfSchedule, n_samples=200) -> float:
    """Largest instantaneous oscillation frequency (rad/s) along the schedule.

    Uses the transverse frequency where a shell exists and the bare radial trap
    frequency otherwise.
    """
    c = trap.constants
    ts = np.linspace(schedule.t_start, schedule.t_end, n_samples)
    Deltas = schedule.detuning(ts, trap.V0 / c.hbar)
    Omegas = schedule.rabi(ts)
    best = trap.field.harmonic_frequencies(2, c)[1]
    for D, W in zip(Deltas, Omegas):
        if D > 0 and W > 0:
            try:
                z0 = resonance_height(trap, D)
                best = max(best, transverse_frequency(local_gradient_alpha(trap, z0), W, c))
            except DomainError:
                continue
    return best


def default_time_step(trap, schedule):
    """1/(100 f_trans) at the stiffest point of the schedule."""
    return 2 * np.pi / (100 * max_transverse_frequency(trap, schedule))


@dataclass
class Snapshot:
    time: float
    positions: np.ndarray = field(repr=False)
    velocities: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def _outside_box(pos):
    return (np.abs(pos[:, 0]) > BOX_HALF_X) | (np.hypot(pos[:, 1], pos[:, 2]) > BOX_RHO)


def _integrate_chunk(pos, vel, w, lost, cross, trap, mF, gravity, t0, dt, Deltas, Omegas,
                     s_init, jumps, snap_steps, lz, n_lz):
    c = trap.constants
    hbar, m = c.hbar, c.m_atom
    pos, vel, w, lost, cross = pos.copy(), vel.copy(), w.copy(), lost.copy(), cross.copy()
    s_prev = s_init.copy()
    half = 0.5 * dt
    snaps = []
    for k in range(len(Deltas)):
        D, W = Deltas[k], Omegas[k]
        pos += half * vel
        _, F, vt, _ = energy_and_force(trap, pos, D, W, mF, gravity)
        if lz and n_lz:
            s = vt - hbar * D
            flip = ((s > 0) != (s_prev > 0)) & ~lost
            if np.any(flip):
                cross[flip] += 1
                # sweep rate of V_trap - hbar Delta through zero: alpha |v_normal| for a static
                # shell, plus the shell's own motion when Delta(t) changes
                rate = np.abs(s[flip] - s_prev[flip]) / dt
                expo = np.pi * hbar * W**2 / (2 * rate) if W > 0 else np.zeros(rate.shape)
                w[flip] *= (1.0 - np.exp(-expo)) ** n_lz
            s_prev = s
        vel += (dt / m) * F
        pos += half * vel
        out = _outside_box(pos) & ~lost
        if np.any(out):
            pos[out] -= dt * vel[out]  # last in-box position
            vel[out] = 0.0
            w[out] = 0.0
            lost |= out
        vel[lost] = 0.0
        for jk, D_after, W_after, jump in jumps:
            if jk == k:
                vt_now = trap.value(pos)
                keep = phase_jump_retention(D_after - vt_now / hbar, W_after, jump, n_lz or 4)
                w *= keep
        if k + 1 in snap_steps:
            snaps.append((t0 + (k + 1) * dt, pos.copy(), vel.copy(), w.copy()))
    return pos, vel, w, lost, cross, snaps


def integrate_ensemble(cloud: CloudState, dressed: DressedPotential, schedule: RfSchedule, dt, t_end,
                       threads=1, snapshot_stride=0, landau_zener=True, check_step=True):
    """Advance the cloud from cloud.time to t_end through the schedule.

    Drift-kick-drift leapfrog with the force evaluated at the half step, where
    the schedule is sampled. The dressed evaluator supplies the level (m_F),
    gravity and the trap; its own drive is ignored in favour of the schedule.

    Returns (new CloudState, list of Snapshot).
    """
    trap, c = dressed.trap, dressed.constants
    t0 = cloud.time
    if t_end < t0:
        raise DomainError("t_end before cloud time")
    tol = 1e-9 * max(1.0, abs(t_end))
    if t0 < schedule.t_start - tol or t_end > schedule.t_end + tol:
        raise DomainError("integration interval outside schedule support")
    if not dt > 0:
        raise StepSizeError("dt must be > 0")
    if t_end == t0:
        return cloud.copy(), []
    n_steps = max(1, int(round((t_end - t0) / dt)))
    dt = (t_end - t0) / n_steps
    if check_step and dressed.mF != 0:
        f_max = max_transverse_frequency(trap, schedule) / (2 * np.pi)
        if dt > 1.0 / (50 * f_max) * (1 + 1e-9):
            raise StepSizeError(f"dt = {dt:.3g} s exceeds 1/(50 f_trans) = {1 / (50 * f_max):.3g} s")

    w0 = trap.V0 / c.hbar
    t_mid = t0 + (np.arange(n_steps) + 0.5) * dt
    Deltas = schedule.omega_rf(t_mid) - w0
    Omegas = schedule.rabi(t_mid)
    D_start = float(schedule.omega_rf(np.array([t0]))[0] - w0)
    s_init = trap.value(cloud.positions) - c.hbar * D_start

    jumps = []
    for tj, jump in schedule.jumps:
        if t0 < tj <= t_end + tol:
            k = min(n_steps - 1, int(np.ceil((tj - t0) / dt - 1e-9)) - 1)
            D_after = float(schedule.omega_rf(np.array([tj]))[0] - w0)
            W_after = float(schedule.rabi(np.array([tj]))[0])
            jumps.append((k, D_after, W_after, jump))
    snap_steps = set(range(snapshot_stride, n_steps + 1, snapshot_stride)) if snapshot_stride else set()
    n_lz = 2 * abs(dressed.mF)

    n = cloud.n
    threads = max(1, min(int(threads), n))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    args = dict(trap=trap, mF=dressed.mF, gravity=dressed.include_gravity, t0=t0, dt=dt, Deltas=Deltas,
                Omegas=Omegas, jumps=jumps, snap_steps=snap_steps, lz=landau_zener, n_lz=n_lz)

    def run(i):
        sl = slice(bounds[i], bounds[i + 1])
        return _integrate_chunk(cloud.positions[sl], cloud.velocities[sl], cloud.weights[sl], cloud.lost[sl],
                                cloud.crossings[sl], s_init=s_init[sl], **args)

    if threads == 1:
        parts = [run(0)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(threads)))

    pos, vel, w, lost, cross = (np.concatenate([p[j] for p in parts]) for j in range(5))
    snaps = []
    for j in range(len(parts[0][5])):
        t = parts[0][5][j][0]
        snaps.append(Snapshot(t, *(np.concatenate([p[5][j][q] for p in parts]) for q in (1, 2, 3))))
    new = CloudState(pos, vel, np.clip(w, 0.0, 1.0), t_end, cloud.master_seed, lost, cross)
    return new, snaps


def particle_energies(cloud: CloudState, dressed: DressedPotential) -> np.ndarray:
    """Kinetic plus total potential energy of each particle (J)."""
    m = dressed.constants.m_atom
    return 0.5 * m * np.sum(cloud.velocities**2, axis=1) + dressed.total(cloud.positions)


def time_of_flight(cloud: CloudState, t_tof, constants: PhysicalConstants = RB87) -> CloudState:
    """Ballistic flight under gravity alone."""
    if t_tof < 0:
        raise DomainError("t_tof must be >= 0")
    g = np.array([0.0, 0.0, -constants.g_grav])
    out = cloud.copy()
    free = ~cloud.lost
    out.positions[free] = cloud.positions[free] + cloud.velocities[free] * t_tof + 0.5 * g * t_tof**2
    out.velocities[free] = cloud.velocities[free] + g * t_tof
    out.time = cloud.time + t_tof
    return out


@dataclass(frozen=True)
class CloudReport:
    center: np.ndarray
    rms_size: np.ndarray
    temperature: np.ndarray
    surviving_fraction: float

    def as_row(self):
        return {
            "x_um": self.center[0] * 1e6, "y_um": self.center[1] * 1e6, "z_um": self.center[2] * 1e6,
            "sx_um": self.rms_size[0] * 1e6, "sy_um": self.rms_size[1] * 1e6, "sz_um": self.rms_size[2] * 1e6,
            "tx_uk": self.temperature[0] * 1e6, "ty_uk": self.temperature[1] * 1e6,
            "tz_uk": self.temperature[2] * 1e6, "surviving": self.surviving_fraction,
        }


def weighted_statistics(positions, velocities, weights, constants: PhysicalConstants = RB87) -> CloudReport:
    wsum = float(np.sum(weights))
    if not wsum > 0:
        raise EmptyCloudError("total survival weight is zero")
    p = weights / wsum
    center = p @ positions
    size = np.sqrt(p @ (positions - center) ** 2)
    vmean = p @ velocities
    temp = constants.m_atom * (p @ (velocities - vmean) ** 2) / constants.k_B
    return CloudReport(center, size, temp, wsum / len(weights))


def cloud_statistics(cloud: CloudState, constants: PhysicalConstants = RB87) -> CloudReport:
    """Weight-averaged centre, rms sizes, per-axis temperatures m Var(v_i)/k_B, surviving fraction."""
    return weighted_statistics(cloud.positions, cloud.velocities, cloud.weights, constants)


def snapshot_rows(snapshots, constants: PhysicalConstants = RB87):
    rows = []
    for s in snapshots:
        row = {"t_s": s.time}
        row.update(weighted_statistics(s.positions, s.velocities, s.weights, constants).as_row())
        rows.append(row)
    return rows


@dataclass(frozen=True)
class ResonanceScan:
    drive_freqs: np.ndarray
    sizes: np.ndarray
    surviving: np.ndarray
    peak_center: float


def _parabolic_peak(x, y):
    i = int(np.argmax(y))
    lo, hi = max(0, i - 2), min(len(x), i + 3)
    if hi - lo < 3:
        return float(x[i])
    a, b, _ = np.polyfit(x[lo:hi], y[lo:hi], 2)
    if a >= 0:
        return float(x[i])
    return float(np.clip(-b / (2 * a), x[lo], x[hi - 1]))


def modulation_schedule(trap: TrapPotential, Delta0, Omega, mod_depth, freq, t_start, duration) -> RfSchedule:
    """Delta(t) = Delta0 + mod_depth sin(2 pi f (t - t_start)) at constant Omega."""
    w = Delta0 + trap.V0 / trap.constants.hbar
    kind = "sinusoid" if mod_depth else "constant"
    seg = Segment(t_start, t_start + duration, kind, w, w, Omega, Omega, mod_depth=mod_depth, mod_freq=freq)
    return RfSchedule((seg,))


def dipole_resonance_scan(trap: TrapPotential, Delta0, Omega, mod_depth, drive_freqs, t_excite, t_tof,
                          cloud: CloudState, dt=None, threads=1) -> ResonanceScan:
    """Vertical rms size after modulation of the detuning and time of flight, per drive frequency."""
    drive_freqs = np.asarray(drive_freqs, dtype=float)
    if drive_freqs.size == 0:
        raise DomainError("need at least one drive frequency")
    if abs(mod_depth) >= abs(Delta0):
        raise DomainError("modulation depth must be small compared to Delta0")
    dressed = DressedPotential.from_detuning(trap, Delta0, Omega)
    sizes, surv = [], []
    for f in drive_freqs:
        sched = modulation_schedule(trap, Delta0, Omega, mod_depth, f, cloud.time, t_excite)
        step = dt if dt is not None else default_time_step(trap, sched)
        out, _ = integrate_ensemble(cloud, dressed, sched, step, cloud.time + t_excite, threads=threads)
        rep = cloud_statistics(time_of_flight(out, t_tof, trap.constants), trap.constants)
        sizes.append(rep.rms_size[2])
        surv.append(rep.surviving_fraction)
    sizes = np.array(sizes)
    return ResonanceScan(drive_freqs, sizes, np.array(surv), _parabolic_peak(drive_freqs, sizes))


def energy_drift(cloud: CloudState, dressed: DressedPotential, dt, duration, window_fraction=0.5, stride=5,
                 threads=1) -> np.ndarray:
    """Secular per-particle energy drift in a static dressed potential.

    Leapfrog energies oscillate at the level (omega dt)^2/8 without drifting,
    so the drift is measured as the change between Hann-weighted averages over
    the first and last ``window_fraction`` of the run (by default its two
    halves), relative to the energy above the potential minimum. Landau-Zener
    weighting is switched off.
    """
    sched = RfSchedule.constant(dressed.drive.omega_rf, dressed.Omega, duration, t0=cloud.time)
    _, snaps = integrate_ensemble(cloud, dressed, sched, dt, cloud.time + duration, threads=threads,
                                  snapshot_stride=stride, landau_zener=False)
    m = dressed.constants.m_atom
    u_min = float(dressed.total(trap_minimum(dressed)))
    energies = [particle_energies(cloud, dressed)]
    energies += [0.5 * m * np.sum(s.velocities**2, axis=1) + dressed.total(s.positions) for s in snaps]
    excess = np.array(energies) - u_min
    n_win = max(3, int(window_fraction * len(excess)))
    w = np.hanning(n_win + 2)[1:-1]
    first = w @ excess[:n_win] / w.sum()
    last = w @ excess[-n_win:] / w.sum()
    return np.abs(last - first) / first
