"""Line-oriented run configuration.

One experiment per file, one ``dotted.key = value`` per line, ``#`` starts a
comment. Unit suffixes are part of the key names (``bloch.t1_ns``,
``drive.omega_mhz``); frequencies are ordinary MHz and are converted to
rad/us by the CLI.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field

INF = math.inf


class ConfigError(ValueError):
    """Invalid configuration text or value."""


@dataclass(frozen=True)
class Key:
    kind: type | tuple
    default: object
    doc: str = ""
    positive: bool = False
    nonnegative: bool = False


def _choice(*opts):
    return tuple(opts)


_BLOCH = {
    "bloch.rabi_mhz": Key(float, 10.0, "optical Rabi frequency / 2 pi", nonnegative=True),
    "bloch.t1_ns": Key(float, 14.0, "radiative lifetime", positive=True),
    "bloch.t2_star_ns": Key(float, INF, "pure dephasing time (inf: none)", positive=True),
    "bloch.trap_time_ns": Key(float, INF, "1/Gamma, spin trapping under illumination", positive=True),
    "bloch.repump_time_ns": Key(float, INF, "1/repump rate out of the trap", positive=True),
    "bloch.dephasing": Key(_choice("relation", "literal"), "relation", "dephasing normalisation"),
}
_READOUT = {
    "readout.mode": Key(_choice("pulsed", "cw"), "pulsed", "pulsed window or steady state"),
    "readout.window_ns": Key(float, 500.0, "readout pulse length (pulsed mode)", positive=True),
}
_NOISE = {
    "noise.kind": Key(_choice("none", "quasi_static_gaussian", "ornstein_uhlenbeck"), "quasi_static_gaussian"),
    "noise.sigma_rad_per_us": Key(float, math.sqrt(2.0) / 74.0, "rms detuning", nonnegative=True),
    "noise.tau_c_us": Key(float, 200.0, "OU correlation time", positive=True),
    "mc.shots": Key(int, 4000, "Monte Carlo shots", positive=True),
}
_PL = {
    "readout.bright": Key(float, 1.0, "PL rate of the target state"),
    "readout.dark": Key(float, 0.0, "PL rate of the other state"),
}
_SPIN = {
    "spin.d_mhz": Key(float, 1333.9535),
    "spin.e_mhz": Key(float, 18.4195),
}

SCHEMA = {
    "ple": {
        **_BLOCH, **_READOUT,
        "scan.detuning_min_mhz": Key(float, -100.0),
        "scan.detuning_max_mhz": Key(float, 100.0),
        "scan.detuning_points": Key(int, 201, positive=True),
        "drive.amplitude_mhz": Key(float, 0.0, "Stark amplitude / 2 pi (0: no ac drive)", nonnegative=True),
        "drive.omega_mhz": Key(float, 700.0, positive=True),
    },
    "lzs": {
        **_BLOCH, **_READOUT,
        "drive.omega_mhz": Key(float, 700.0, positive=True),
        "scan.amp_over_omega_min": Key(float, 0.0, nonnegative=True),
        "scan.amp_over_omega_max": Key(float, 20.0, nonnegative=True),
        "scan.amp_points": Key(int, 200, positive=True),
        "scan.detuning_min_over_omega": Key(float, -16.0),
        "scan.detuning_max_over_omega": Key(float, 16.0),
        "scan.detuning_points": Key(int, 200, positive=True),
    },
    "bichromatic": {
        **_BLOCH, **_READOUT,
        "drive.omega1_mhz": Key(float, 1000.0, positive=True),
        "drive.x1": Key(float, 2.4048, "A1/omega1", nonnegative=True),
        "drive.x2": Key(float, 2.4048, "A2/omega2", nonnegative=True),
        "scan.phase_points": Key(int, 25, positive=True),
        "scan.detuning_min_over_omega": Key(float, -8.0),
        "scan.detuning_max_over_omega": Key(float, 8.0),
        "scan.detuning_points": Key(int, 321, positive=True),
        "scan.error_estimate": Key(bool, True),
    },
    "optical-rabi": {
        **_BLOCH,
        "bloch.rabi_mhz": Key(float, 100.0, nonnegative=True),
        "laser.detuning_mhz": Key(float, 0.0),
        "pulse.length_ns": Key(float, 80.0, positive=True),
        "pulse.tail_ns": Key(float, 40.0, nonnegative=True),
        "pulse.shape": Key(_choice("rectangular", "smoothed"), "rectangular"),
        "pulse.rise_ns": Key(float, 0.0, nonnegative=True),
        "trace.bin_ns": Key(float, 1.0, positive=True),
        "trace.substeps": Key(int, 10, positive=True),
        "noise.total_counts": Key(float, 0.0, "Poisson total (0: noiseless)", nonnegative=True),
    },
    "spin-rabi": {
        **_SPIN, **_PL,
        "mw.transition": Key(_choice("zero_plus", "plus_minus"), "zero_plus"),
        "mw.rabi_mhz": Key(float, 5.0, positive=True),
        "mw.full3level": Key(bool, False, "keep the spectator level"),
        "mw.leakage": Key(float, 0.0, "spectator coupling (full 3-level only)"),
        "scan.duration_max_us": Key(float, 1.0, positive=True),
        "scan.points": Key(int, 101, positive=True),
    },
    "ramsey": {
        **_NOISE, **_PL,
        "ramsey.detuning_mhz": Key(float, 0.1),
        "scan.tau_max_us": Key(float, 200.0, positive=True),
        "scan.points": Key(int, 81, positive=True),
    },
    "echo": {
        **_NOISE, **_PL,
        "noise.kind": Key(_choice("none", "quasi_static_gaussian", "ornstein_uhlenbeck"), "ornstein_uhlenbeck"),
        "noise.sigma_rad_per_us": Key(float, 0.0, "rms detuning (0: calibrate to echo.target_us)",
                                      nonnegative=True),
        "echo.target_us": Key(float, 222.0, "echo time used when sigma is 0", positive=True),
        "scan.tau_max_us": Key(float, 600.0, positive=True),
        "scan.points": Key(int, 61, positive=True),
    },
    "zefoz": {
        **_SPIN,
        "spin.g": Key(float, 2.0, positive=True),
        "spin.azz_mhz": Key(float, 1.0),
        "zefoz.branch": Key(_choice("up", "down"), "up"),
        "scan.bz_min_mt": Key(float, -1.0),
        "scan.bz_max_mt": Key(float, 1.0),
        "scan.points": Key(int, 201, positive=True),
    },
    "fit": {
        "fit.input": Key(str, ""),
        "fit.model": Key(_choice("lorentzian", "bloch", "gaussian", "exponential", "stretched"), "lorentzian"),
        "fit.rabi_mhz": Key(float, 100.0, "known optical Rabi frequency (bloch)", nonnegative=True),
        "fit.detuning_mhz": Key(float, 0.0),
    },
}
EXPERIMENTS = tuple(SCHEMA)
COMMON = {"seed": Key(int, 0)}


@dataclass
class RunConfig:
    experiment: str
    values: dict = field(default_factory=dict)
    seed: int = 0

    def __getitem__(self, key):
        return self.values[key]

    def serialize(self) -> str:
        return serialize(self)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(key, spec: Key, raw: str, where: str):
    raw = raw.strip()
    kind = spec.kind
    try:
        if isinstance(kind, tuple):
            if raw not in kind:
                raise ValueError(f"expected one of {', '.join(kind)}")
            return raw
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError("expected true or false")
        if kind is int:
            val = int(raw)
        elif kind is float:
            val = float(raw)
            if math.isnan(val):
                raise ValueError("NaN is not allowed")
        else:
            return raw
    except ValueError as err:
        raise ConfigError(f"{where}: bad value {raw!r} for {key}: {err}") from None
    if spec.positive and not val > 0:
        raise ConfigError(f"{where}: {key} must be positive, got {raw}")
    if spec.nonnegative and not val >= 0:
        raise ConfigError(f"{where}: {key} must be >= 0, got {raw}")
    return val


def _suggest(key, valid):
    near = difflib.get_close_matches(key, valid, n=1, cutoff=0.0)
    return f" (did you mean {near[0]!r}?)" if near else ""


def defaults(experiment) -> RunConfig:
    if experiment not in SCHEMA:
        raise ConfigError(f"unknown experiment {experiment!r}{_suggest(experiment, EXPERIMENTS)}")
    return RunConfig(experiment, {k: s.default for k, s in SCHEMA[experiment].items()}, 0)


def set_value(cfg: RunConfig, key, raw, where="override"):
    key = key.strip()
    if key == "seed":
        cfg.seed = _convert(key, COMMON["seed"], raw, where)
        return cfg
    schema = SCHEMA[cfg.experiment]
    if key not in schema:
        raise ConfigError(f"{where}: unknown key {key!r}{_suggest(key, list(schema) + ['seed'])}")
    cfg.values[key] = _convert(key, schema[key], raw, where)
    return cfg


def parse(text, experiment=None, source="<config>") -> RunConfig:
    """Parse configuration text; ``experiment`` fills in a missing header."""
    entries = []
    seen = {}
    declared = None
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        if key == "experiment":
            declared = raw
            if raw not in SCHEMA:
                raise ConfigError(f"{where}: unknown experiment {raw!r}{_suggest(raw, EXPERIMENTS)}")
            continue
        entries.append((key, raw, where))
    if declared and experiment and declared != experiment:
        raise ConfigError(f"{source}: file is for experiment {declared!r}, not {experiment!r}")
    name = declared or experiment
    if name is None:
        raise ConfigError(f"{source}: no 'experiment = ...' line")
    cfg = defaults(name)
    for key, raw, where in entries:
        set_value(cfg, key, raw, where)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    """Cross-key checks that single-key validation cannot see."""
    v = cfg.values
    for lo, hi in (
        ("scan.detuning_min_mhz", "scan.detuning_max_mhz"),
        ("scan.amp_over_omega_min", "scan.amp_over_omega_max"),
        ("scan.detuning_min_over_omega", "scan.detuning_max_over_omega"),
        ("scan.bz_min_mt", "scan.bz_max_mt"),
    ):
        if lo in v and not v[hi] > v[lo]:
            raise ConfigError(f"{hi} must exceed {lo}")
    for key in ("scan.detuning_points", "scan.amp_points", "scan.points", "scan.phase_points"):
        if key in v and key != "scan.amp_points" and v[key] < 2 and cfg.experiment != "lzs":
            raise ConfigError(f"{key} must be at least 2")
    if cfg.experiment == "optical-rabi" and v["pulse.shape"] == "smoothed" and not v["pulse.rise_ns"] > 0:
        raise ConfigError("pulse.rise_ns must be positive for a smoothed pulse")
    if cfg.experiment == "fit" and not v["fit.input"]:
        raise ConfigError("fit.input must name a scan file")
    return cfg


def serialize(cfg: RunConfig) -> str:
    """Canonical text: header, seed, then every key in sorted order."""
    lines = [f"experiment = {cfg.experiment}", f"seed = {cfg.seed}"]
    lines += [f"{k} = {_fmt(cfg.values[k])}" for k in sorted(cfg.values)]
    return "\n".join(lines) + "\n"
