"""Run configuration: parsing, validation and serialisation.

The format is YAML (JSON is a subset, so emitted JSON re-parses). Every
problem found is reported with its line number; parsing never stops at the
first error.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field

import yaml

from .errors import RfShellError

SUBCOMMANDS = ("characterize", "sweep", "load", "resonance", "noise", "estimate")
SWEEP_PARAMETERS = ("delta_mhz", "omega_rf_mhz", "rabi_khz", "B0_gauss", "b_prime_gauss_per_cm",
                    "b_dprime_gauss_per_cm2")


class ConfigError(RfShellError):
    """Invalid configuration; ``errors`` lists every problem found (CLI exit code 1)."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class FieldConfig:
    B0_gauss: float = 1.8
    b_prime_gauss_per_cm: float | None = 225.0
    b_dprime_gauss_per_cm2: float | None = None
    omega_x_hz: float | None = None
    omega_radial_hz: float | None = None
    calibrate: bool = False
    cross_terms: bool = False
    axial_hz: float = 21.0  # default curvature source when b_dprime is not given


@dataclass(frozen=True)
class RfConfig:
    delta_mhz: tuple | None = None
    omega_rf_mhz: tuple | None = None
    rabi_khz: tuple | None = None
    b1_gauss: float | None = None


@dataclass(frozen=True)
class EnsembleConfig:
    n_particles: int = 1000
    temperature_uk: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str = "hold"
    switch_on_s: float = 2e-3
    chirp_s: float = 0.15
    hold_s: float = 0.0
    excite_s: float = 0.15
    tof_s: float = 0.01
    mod_depth_khz: float = 5.0
    drive_hz: tuple = ()
    dt_s: float | None = None
    noise_kind: str = "white"
    target_fwhm_hz: float | None = None
    psd_hz2_per_hz: float | None = None
    position_psd_m2_per_hz: float | None = None
    ou_tau_s: float = 1.0
    noise_realizations: int = 1
    staircase_steps: int = 0
    phase_jump_rad: float | None = None


@dataclass(frozen=True)
class SweepConfig:
    parameter: str | None = None
    values: tuple = ()


@dataclass(frozen=True)
class GasConfig:
    n_atoms: float = 1e5
    frequencies_hz: tuple | None = None
    temperature_nk: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    path: str = "."
    prefix: str | None = None
    snapshot_stride: int = 0
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    rf: RfConfig = dc_field(default_factory=RfConfig)
    ensemble: EnsembleConfig = dc_field(default_factory=EnsembleConfig)
    schedule: ScheduleConfig = dc_field(default_factory=ScheduleConfig)
    sweep: SweepConfig = dc_field(default_factory=SweepConfig)
    gas: GasConfig = dc_field(default_factory=GasConfig)
    output: OutputConfig = dc_field(default_factory=OutputConfig)

    def to_dict(self):
        def clean(v):
            if isinstance(v, tuple):
                return [clean(x) for x in v]
            return v
        return {blk: {k: clean(v) for k, v in block.items()} for blk, block in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# key -> (kind, low, high); low/high are inclusive bounds, None for open.
# kinds: float, pfloat (> 0), int, bool, str, floats (scalar or list of floats), choice tuple
_SCHEMA = {
    "field": {
        "B0_gauss": ("pfloat", None, 100.0),
        "b_prime_gauss_per_cm": ("pfloat", None, 1e4),
        "b_dprime_gauss_per_cm2": ("float", 0.0, 1e6),
        "omega_x_hz": ("pfloat", None, 1e5),
        "omega_radial_hz": ("pfloat", None, 1e5),
        "calibrate": ("bool",),
        "cross_terms": ("bool",),
        "axial_hz": ("pfloat", None, 1e5),
    },
    "rf": {
        "delta_mhz": ("floats", 0.0, 100.0),
        "omega_rf_mhz": ("floats", 0.0, 100.0),
        "rabi_khz": ("floats", 0.0, 1e4),
        "b1_gauss": ("float", 0.0, 10.0),
    },
    "ensemble": {
        "n_particles": ("int", 1, 10**7),
        "temperature_uk": ("pfloat", None, 1e3),
        "seed": ("int", 0, 2**63 - 1),
    },
    "schedule": {
        "kind": (("hold", "loading", "staircase"),),
        "switch_on_s": ("pfloat", None, 10.0),
        "chirp_s": ("pfloat", None, 100.0),
        "hold_s": ("float", 0.0, 100.0),
        "excite_s": ("pfloat", None, 100.0),
        "tof_s": ("float", 0.0, 1.0),
        "mod_depth_khz": ("float", 0.0, 1e4),
        "drive_hz": ("floats", 0.0, 1e6),
        "dt_s": ("pfloat", None, 1e-2),
        "noise_kind": (("white", "ou"),),
        "target_fwhm_hz": ("float", 0.0, 1e7),
        "psd_hz2_per_hz": ("float", 0.0, None),
        "position_psd_m2_per_hz": ("float", 0.0, 1e-6),
        "ou_tau_s": ("pfloat", None, 1e3),
        "noise_realizations": ("int", 1, 10**5),
        "staircase_steps": ("int", 0, 10**7),
        "phase_jump_rad": ("float", -2 * math.pi, 2 * math.pi),
    },
    "sweep": {
        "parameter": (SWEEP_PARAMETERS,),
        "values": ("floats", None, None),
    },
    "gas": {
        "n_atoms": ("float", 1.0, 1e12),
        "frequencies_hz": ("floats", 0.0, 1e6),
        "temperature_nk": ("float", 0.0, 1e6),
    },
    "output": {
        "path": ("str",),
        "prefix": ("str",),
        "snapshot_stride": ("int", 0, 10**9),
        "format": (("csv", "json"),),
    },
}

_BLOCK_TYPES = {"field": FieldConfig, "rf": RfConfig, "ensemble": EnsembleConfig, "schedule": ScheduleConfig,
                "sweep": SweepConfig, "gas": GasConfig, "output": OutputConfig}


def _scalar(node):
    """Python value of a YAML scalar node, using the default resolver."""
    return yaml.safe_load(yaml.serialize(node))


def _check_number(v, kind, lo, hi, where, errors):
    if isinstance(v, str):
        # YAML 1.1 reads exponent forms without a dot (1e5) as strings
        try:
            v = float(v)
        except ValueError:
            pass
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{where}: expected a number, got {v!r}")
        return None
    v = float(v)
    if not math.isfinite(v):
        errors.append(f"{where}: value must be finite")
    elif kind == "pfloat" and not v > 0:
        errors.append(f"{where}: value must be > 0")
    elif lo is not None and v < lo:
        errors.append(f"{where}: value {v:g} below minimum {lo:g}")
    elif hi is not None and v > hi:
        errors.append(f"{where}: value {v:g} above maximum {hi:g}")
    else:
        return v
    return None


def _convert(node, rule, where, errors):
    kind = rule[0]
    if isinstance(kind, tuple):
        v = _scalar(node) if isinstance(node, yaml.ScalarNode) else None
        if v not in kind:
            errors.append(f"{where}: expected one of {', '.join(kind)}, got {v!r}")
            return None
        return v
    if kind == "floats":
        items = node.value if isinstance(node, yaml.SequenceNode) else [node]
        out = []
        for item in items:
            if not isinstance(item, yaml.ScalarNode):
                errors.append(f"line {item.start_mark.line + 1}: expected a number")
                continue
            v = _check_number(_scalar(item), "float", rule[1], rule[2], f"line {item.start_mark.line + 1}: "
                              f"{where.split(': ', 1)[1]}", errors)
            if v is not None:
                out.append(v)
        return tuple(out) if len(out) == len(items) else None
    if not isinstance(node, yaml.ScalarNode):
        errors.append(f"{where}: expected a scalar value")
        return None
    v = _scalar(node)
    if kind == "bool":
        if not isinstance(v, bool):
            errors.append(f"{where}: expected true or false, got {v!r}")
            return None
        return v
    if kind == "str":
        if v is None:
            errors.append(f"{where}: expected a string")
            return None
        return str(v)
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int) and not (isinstance(v, float) and v.is_integer()):
            errors.append(f"{where}: expected an integer, got {v!r}")
            return None
        v = int(v)
        if v < rule[1] or v > rule[2]:
            errors.append(f"{where}: value {v} outside [{rule[1]}, {rule[2]}]")
            return None
        return v
    return _check_number(v, kind, rule[1], rule[2], where, errors)


def parse_config(text: str) -> RunConfig:
    """Validate a YAML/JSON run configuration; raises ConfigError listing all problems."""
    errors = []
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError([f"{line}syntax error: {getattr(exc, 'problem', exc)}"]) from None
    if root is None:
        root = yaml.MappingNode("tag:yaml.org,2002:map", [])
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError([f"line {root.start_mark.line + 1}: top level must be a mapping of blocks"])

    values = {blk: {} for blk in _SCHEMA}
    lines = {}
    seen_blocks = set()
    for knode, vnode in root.value:
        blk = _scalar(knode)
        line = knode.start_mark.line + 1
        if blk not in _SCHEMA:
            errors.append(f"line {line}: unknown block {blk!r} (expected one of {', '.join(_SCHEMA)})")
            continue
        if blk in seen_blocks:
            errors.append(f"line {line}: duplicate block {blk!r}")
            continue
        seen_blocks.add(blk)
        lines[blk] = line
        if isinstance(vnode, yaml.ScalarNode) and _scalar(vnode) is None:
            continue
        if not isinstance(vnode, yaml.MappingNode):
            errors.append(f"line {line}: block {blk!r} must be a mapping")
            continue
        for k2, v2 in vnode.value:
            key = _scalar(k2)
            kline = k2.start_mark.line + 1
            where = f"line {kline}: {blk}.{key}"
            if key not in _SCHEMA[blk]:
                errors.append(f"line {kline}: unknown key {blk}.{key}")
                continue
            if key in values[blk]:
                errors.append(f"{where}: duplicate key")
                continue
            lines[(blk, key)] = kline
            if isinstance(v2, yaml.ScalarNode) and _scalar(v2) is None:
                values[blk][key] = None
                continue
            v = _convert(v2, _SCHEMA[blk][key], where, errors)
            if v is not None:
                values[blk][key] = v

    def at(blk, key=None):
        line = lines.get((blk, key)) if key else None
        line = line or lines.get(blk)
        return f"line {line}: " if line else ""

    rf = values["rf"]
    if rf.get("delta_mhz") is not None and rf.get("omega_rf_mhz") is not None:
        errors.append(f"{at('rf', 'omega_rf_mhz')}rf.delta_mhz and rf.omega_rf_mhz are mutually exclusive")
    if rf.get("rabi_khz") is not None and rf.get("b1_gauss") is not None:
        errors.append(f"{at('rf', 'b1_gauss')}rf.rabi_khz and rf.b1_gauss are mutually exclusive")
    fld = values["field"]
    if fld.get("calibrate"):
        for key in ("omega_x_hz", "omega_radial_hz"):
            if fld.get(key) is None:
                errors.append(f"{at('field', 'calibrate')}field.calibrate requires field.{key}")
    elif fld.get("omega_x_hz") is not None or fld.get("omega_radial_hz") is not None:
        errors.append(f"{at('field', 'omega_x_hz')}field.omega_x_hz/omega_radial_hz need calibrate: true")
    sch = values["schedule"]
    levels = [k for k in ("target_fwhm_hz", "psd_hz2_per_hz", "position_psd_m2_per_hz") if sch.get(k) is not None]
    if len(levels) > 1:
        errors.append(f"{at('schedule', levels[1])}schedule: give only one of {', '.join(levels)}")
    sw = values["sweep"]
    if bool(sw.get("parameter")) != bool(sw.get("values")):
        errors.append(f"{at('sweep')}sweep needs both parameter and values")
    gas = values["gas"]
    if gas.get("frequencies_hz") is not None and len(gas["frequencies_hz"]) != 3:
        errors.append(f"{at('gas', 'frequencies_hz')}gas.frequencies_hz needs exactly three values")

    if errors:
        raise ConfigError(errors)
    blocks = {}
    for blk, cls in _BLOCK_TYPES.items():
        kwargs = {k: v for k, v in values[blk].items() if v is not None or _nullable(cls, k)}
        blocks[blk] = cls(**kwargs)
    return RunConfig(**blocks)


def _nullable(cls, key):
    return next(f for f in fields(cls) if f.name == key).default is None


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
    return parse_config(text)
