"""Command-line runner: ``rfshell SUBCOMMAND --config run.yaml --out DIR``.

Exit status 0 on success, 1 for configuration or usage errors, 2 for
runtime and physics errors. Outputs are written to a temporary file and
renamed into place, so a failed run never leaves a partial file behind.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import __version__
from .characterization import characterize, transverse_frequency
from .condensate import GasSpec, critical_temperature, dimensionality_report, tf_chemical_potential
from .config import SUBCOMMANDS, ConfigError, RunConfig, load_config
from .dressed import DressedPotential, rabi_from_field_amplitude
from .dynamics import (
    build_loading_schedule,
    cloud_statistics,
    default_time_step,
    dipole_resonance_scan,
    integrate_ensemble,
    sample_shell_cloud,
    sample_thermal_cloud,
    snapshot_rows,
)
from .errors import RfShellError
from .field import GAUSS, GAUSS_PER_CM, RB87, IoffePritchardField, TrapPotential, calibrate_ip_from_quic
from .imperfections import (
    PSD_CONVENTION,
    FrequencyNoiseModel,
    calibrate_to_fwhm,
    decorate_schedule_with_noise,
    frequency_psd_for_position_psd,
    heating_rate_from_position_noise,
    phase_jump_schedule,
    position_sensitivity,
    simulate_holding_heating,
)
from .schedule import RfSchedule

TWO_PI = 2 * np.pi
CONVENTIONS = {
    "psd_convention": PSD_CONVENTION,
    "detuning_sign": "Delta = omega_rf - V0/hbar; Delta > 0 puts the shell below the trap centre",
    "landau_zener_model": "(1 - P_na)^(2F) per shell crossing",
    "phase_jump_model": "spin-F projection ((1 + cos gamma)/2)^(2F)",
}


# ---------------------------------------------------------------- building blocks

def build_field(cfg: RunConfig) -> IoffePritchardField:
    f = cfg.field
    B0 = f.B0_gauss * GAUSS
    if f.calibrate:
        fld = calibrate_ip_from_quic(TWO_PI * f.omega_x_hz, TWO_PI * f.omega_radial_hz, B0)
        return replace(fld, cross_terms=f.cross_terms)
    if f.b_dprime_gauss_per_cm2 is not None:
        b_dprime = f.b_dprime_gauss_per_cm2  # 1 G/cm^2 = 1 T/m^2
    else:
        b_dprime = RB87.m_atom * (TWO_PI * f.axial_hz) ** 2 / (2 * RB87.g_F * RB87.mu_B)
    return IoffePritchardField(B0=B0, b_prime=f.b_prime_gauss_per_cm * GAUSS_PER_CM, b_dprime=b_dprime,
                               cross_terms=f.cross_terms)


def _detuning_pairs(cfg, trap):
    rf = cfg.rf
    if rf.delta_mhz is not None:
        return [(v, TWO_PI * 1e6 * v) for v in rf.delta_mhz]
    if rf.omega_rf_mhz is not None:
        w0 = trap.V0 / trap.constants.hbar
        return [((TWO_PI * 1e6 * v - w0) / TWO_PI / 1e6, TWO_PI * 1e6 * v - w0) for v in rf.omega_rf_mhz]
    raise ConfigError(["rf: one of delta_mhz or omega_rf_mhz is required"])


def _rabi_pairs(cfg):
    rf = cfg.rf
    if rf.rabi_khz is not None:
        return [(v, TWO_PI * 1e3 * v) for v in rf.rabi_khz]
    if rf.b1_gauss is not None:
        W = rabi_from_field_amplitude(rf.b1_gauss * GAUSS)
        return [(W / TWO_PI / 1e3, W)]
    raise ConfigError(["rf: one of rabi_khz or b1_gauss is required"])


def detunings(cfg: RunConfig, trap: TrapPotential) -> list:
    """Detunings (rad/s) from whichever rf key is set; omega_rf is converted, never guessed."""
    return [D for _, D in _detuning_pairs(cfg, trap)]


def rabis(cfg: RunConfig) -> list:
    return [W for _, W in _rabi_pairs(cfg)]


def _single(values, name):
    if len(values) != 1:
        raise ConfigError([f"rf.{name}: this subcommand needs a single value, got {len(values)}"])
    return values[0]


def _time_step(cfg, trap, schedule):
    return cfg.schedule.dt_s if cfg.schedule.dt_s is not None else default_time_step(trap, schedule)


def noise_model(cfg: RunConfig, dt, alpha=None) -> FrequencyNoiseModel:
    s = cfg.schedule
    seed = cfg.ensemble.seed + 1  # the cloud uses the seed itself
    if s.target_fwhm_hz is not None:
        return calibrate_to_fwhm(s.target_fwhm_hz, dt, s.noise_kind, s.ou_tau_s, seed)
    psd = s.psd_hz2_per_hz
    if s.position_psd_m2_per_hz is not None:
        psd = frequency_psd_for_position_psd(s.position_psd_m2_per_hz, alpha)
    if psd is None:
        return FrequencyNoiseModel("white", 0.0, seed=seed)
    if s.noise_kind == "ou":
        # OU with the given low-frequency one-sided level 4 var tau
        return FrequencyNoiseModel("ou", variance=psd / (4 * s.ou_tau_s), correlation_time=s.ou_tau_s, seed=seed)
    return FrequencyNoiseModel("white", psd=psd, seed=seed)


# ---------------------------------------------------------------- subcommands

CHARACTERIZE_COLUMNS = ["delta_mhz", "rabi_khz", "z0_um", "alpha_si", "f_trans_hz", "f1_hz", "f2_hz",
                        "f_hess_1_hz", "f_hess_2_hz", "f_hess_3_hz", "sag_um", "gap_uk",
                        "alpha_linear_si", "f_trans_linear_hz"]


def _characterize_rows(cfg, trap):
    c = trap.constants
    alpha_lin = c.g_F * c.mu_B * trap.field.b_prime
    rows = []
    for (d_mhz, D), (w_khz, W) in itertools.product(_detuning_pairs(cfg, trap), _rabi_pairs(cfg)):
        ch = characterize(trap, D, W)
        fh = np.array(ch.hessian_freqs) / TWO_PI
        rows.append({
            "delta_mhz": d_mhz, "rabi_khz": w_khz, "z0_um": ch.z0 * 1e6,
            "alpha_si": ch.alpha, "f_trans_hz": ch.omega_trans / TWO_PI,
            "f1_hz": ch.omega_1 / TWO_PI, "f2_hz": ch.omega_2 / TWO_PI,
            "f_hess_1_hz": fh[0], "f_hess_2_hz": fh[1], "f_hess_3_hz": fh[2],
            "sag_um": ch.sag * 1e6, "gap_uk": ch.shell_gap / c.k_B * 1e6,
            "alpha_linear_si": alpha_lin, "f_trans_linear_hz": transverse_frequency(alpha_lin, W, c) / TWO_PI,
        })
    return rows


def run_characterize(cfg, threads):
    trap = TrapPotential(build_field(cfg))
    return _characterize_rows(cfg, trap), {}


def run_sweep(cfg, threads):
    sw = cfg.sweep
    if not sw.parameter:
        raise ConfigError(["sweep: parameter and values are required for the sweep subcommand"])
    rows = []
    for v in sw.values:
        if sw.parameter in ("delta_mhz", "omega_rf_mhz", "rabi_khz"):
            rf = replace(cfg.rf, **{sw.parameter: (v,)})
            if sw.parameter == "delta_mhz":
                rf = replace(rf, omega_rf_mhz=None)
            elif sw.parameter == "omega_rf_mhz":
                rf = replace(rf, delta_mhz=None)
            elif sw.parameter == "rabi_khz":
                rf = replace(rf, b1_gauss=None)
            c2 = replace(cfg, rf=rf)
        else:
            c2 = replace(cfg, field=replace(cfg.field, **{sw.parameter: v}))
        trap = TrapPotential(build_field(c2))
        for row in _characterize_rows(c2, trap):
            rows.append({sw.parameter: v, **row})
    return rows, {"sweep_parameter": sw.parameter}


def run_load(cfg, threads):
    trap = TrapPotential(build_field(cfg))
    c = trap.constants
    s = cfg.schedule
    D = _single(detunings(cfg, trap), "delta_mhz")
    W = _single(rabis(cfg), "rabi_khz")
    sched = build_loading_schedule(D, W, trap, switch_on=s.switch_on_s, chirp=s.chirp_s,
                                   staircase_steps=s.staircase_steps)
    if s.hold_s > 0:
        plateau = RfSchedule.constant(sched.omega_rf(np.array([sched.t_end]))[0], W, s.hold_s, t0=sched.t_end)
        if s.phase_jump_rad is not None:
            sched = phase_jump_schedule(sched, plateau, sched.t_end, s.phase_jump_rad)
        else:
            sched = sched.extended(s.hold_s)
    elif s.phase_jump_rad is not None:
        raise ConfigError(["schedule.phase_jump_rad needs schedule.hold_s > 0 (the jump happens at the hand-off)"])
    dt = _time_step(cfg, trap, sched)
    sched = decorate_schedule_with_noise(sched, noise_model(cfg, dt), dt)
    wx, wr = trap.field.harmonic_frequencies(2, c)
    e = cfg.ensemble
    cloud = sample_thermal_cloud((wx, wr, wr), (0.0, 0.0, -c.g_grav / wr**2), e.temperature_uk * 1e-6,
                                 e.n_particles, e.seed)
    dressed = DressedPotential.from_detuning(trap, D, W)
    out, snaps = integrate_ensemble(cloud, dressed, sched, dt, sched.t_end, threads=threads,
                                    snapshot_stride=cfg.output.snapshot_stride)
    rows = snapshot_rows(snaps, c)
    if not rows or rows[-1]["t_s"] != out.time:
        rows.append({"t_s": out.time, **cloud_statistics(out, c).as_row()})
    ch = characterize(trap, D, W)
    return rows, {"dt_s": dt, "z0_um": ch.z0 * 1e6, "n_particles": e.n_particles}


def run_resonance(cfg, threads):
    trap = TrapPotential(build_field(cfg))
    s = cfg.schedule
    if not s.drive_hz:
        raise ConfigError(["schedule.drive_hz: list of drive frequencies required for resonance"])
    D = _single(detunings(cfg, trap), "delta_mhz")
    W = _single(rabis(cfg), "rabi_khz")
    dressed = DressedPotential.from_detuning(trap, D, W)
    e = cfg.ensemble
    cloud = sample_shell_cloud(dressed, e.temperature_uk * 1e-6, e.n_particles, e.seed)
    scan = dipole_resonance_scan(trap, D, W, TWO_PI * 1e3 * s.mod_depth_khz, s.drive_hz, s.excite_s, s.tof_s,
                                 cloud, dt=s.dt_s, threads=threads)
    ch = characterize(trap, D, W)
    rows = [{"drive_hz": f, "sz_um": sz * 1e6, "surviving": sv}
            for f, sz, sv in zip(scan.drive_freqs, scan.sizes, scan.surviving)]
    meta = {"peak_hz": scan.peak_center, "f_trans_hz": ch.omega_trans / TWO_PI,
            "f_hess_z_hz": ch.hessian_freqs[2] / TWO_PI}
    return rows, meta


def run_noise(cfg, threads):
    trap = TrapPotential(build_field(cfg))
    c = trap.constants
    s = cfg.schedule
    if not s.hold_s > 0:
        raise ConfigError(["schedule.hold_s must be > 0 for the noise subcommand"])
    D = _single(detunings(cfg, trap), "delta_mhz")
    W = _single(rabis(cfg), "rabi_khz")
    ch = characterize(trap, D, W)
    dressed = DressedPotential.from_detuning(trap, D, W)
    w_z = ch.hessian_freqs[2]
    dt = s.dt_s if s.dt_s is not None else TWO_PI / (100 * w_z)
    noise = noise_model(cfg, dt, ch.alpha)
    e = cfg.ensemble
    cloud = sample_shell_cloud(dressed, e.temperature_uk * 1e-6, e.n_particles, e.seed)
    trace = simulate_holding_heating(cloud, dressed, noise, s.hold_s, dt, realizations=s.noise_realizations,
                                     threads=threads)
    sens = position_sensitivity(ch.alpha, c)
    S_z = noise.psd_at(w_z / TWO_PI) * sens**2
    rows = [{"t_s": t, "tx_uk": T[0] * 1e6, "ty_uk": T[1] * 1e6, "tz_uk": T[2] * 1e6, "surviving": sv}
            for t, T, sv in zip(trace.times, trace.temperatures, trace.surviving)]
    meta = {
        "noise_kind": noise.kind, "noise_sigma_hz": noise.sigma(dt), "dt_s": dt,
        "position_sensitivity_nm_per_khz": sens * 1e12,
        "position_psd_at_ftrans_m2_per_hz": S_z,
        "analytic_rate_uk_per_s": heating_rate_from_position_noise(S_z, w_z, c) / c.k_B * 1e6,
        "rate_x_uk_per_s": trace.rates[0] * 1e6, "rate_y_uk_per_s": trace.rates[1] * 1e6,
        "rate_z_uk_per_s": trace.rates[2] * 1e6,
        "rate_err_z_uk_per_s": trace.rate_errors[2] * 1e6,
    }
    return rows, meta


def run_estimate(cfg, threads):
    """Condensate numbers; the transverse frequency is the largest of the three."""
    g = cfg.gas
    if g.frequencies_hz is not None:
        f1, f2, f3 = g.frequencies_hz
    else:
        trap = TrapPotential(build_field(cfg))
        ch = characterize(trap, _single(detunings(cfg, trap), "delta_mhz"), _single(rabis(cfg), "rabi_khz"))
        f1, f2, f3 = ch.omega_trans / TWO_PI, ch.omega_2 / TWO_PI, ch.omega_1 / TWO_PI
    T = None if g.temperature_nk is None else g.temperature_nk * 1e-9
    spec = GasSpec.from_hz(g.n_atoms, f1, f2, f3, T)
    c = spec.constants
    rep = dimensionality_report(spec, TWO_PI * max(f1, f2, f3))
    row = {"n_atoms": g.n_atoms, "f1_hz": f1, "f2_hz": f2, "f3_hz": f3,
           "mu_hz": tf_chemical_potential(spec) / c.h, "tc_nk": critical_temperature(spec) * 1e9,
           "hbar_wtrans_nk": rep.hbar_omega_trans / c.k_B * 1e9,
           "thermal_2d": rep.thermal_2d, "bec_2d": rep.bec_2d}
    return [row], {"temperature_nk": rep.T * 1e9}


RUNNERS = {"characterize": run_characterize, "sweep": run_sweep, "load": run_load,
           "resonance": run_resonance, "noise": run_noise, "estimate": run_estimate}


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(rows, metadata, fmt) -> str:
    if fmt == "json":
        def plain(v):
            if isinstance(v, np.generic):
                return v.item()
            return v
        doc = {"metadata": {k: plain(v) for k, v in metadata.items()},
               "rows": [{k: plain(v) for k, v in r.items()} for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    for k, v in metadata.items():
        buf.write(f"# {k}: {_fmt(v)}\n")
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def write_atomic(path, text):
    """Write via a temporary file in the target directory and rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg: RunConfig, subcommand: str, out_dir=None, threads=1) -> list:
    """Execute one subcommand and write its outputs; returns the written paths."""
    if subcommand not in RUNNERS:
        raise ConfigError([f"unknown subcommand {subcommand!r}"])
    rows, extra = RUNNERS[subcommand](cfg, threads)
    meta = {"version": __version__, "subcommand": subcommand, "seed": cfg.ensemble.seed, **CONVENTIONS, **extra}
    out_dir = out_dir if out_dir is not None else cfg.output.path
    name = cfg.output.prefix or subcommand
    data_path = os.path.join(out_dir, f"{name}.{cfg.output.format}")
    cfg_path = os.path.join(out_dir, f"{name}.config.json")
    text = render(rows, meta, cfg.output.format)
    write_atomic(cfg_path, cfg.to_json() + "\n")
    write_atomic(data_path, text)
    return [data_path, cfg_path]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="rfshell", description="rf-dressed shell trap simulations")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="YAML or JSON run configuration")
    p.add_argument("--out", help="output directory (overrides output.path)")
    p.add_argument("--seed", type=int, help="master seed (overrides ensemble.seed)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(["--seed must be >= 0"])
            cfg = replace(cfg, ensemble=replace(cfg.ensemble, seed=args.seed))
        if args.threads < 1:
            raise ConfigError(["--threads must be >= 1"])
        paths = run(cfg, args.subcommand, args.out, args.threads)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 1
    except (RfShellError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
