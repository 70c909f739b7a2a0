"""Command-line entry point.

Every simulation subcommand reads an optional config file, applies
``--set key=value`` overrides and ``--seed``, runs, and writes a scan file
whose metadata embeds the canonical configuration. Feeding that
configuration back with ``--config`` reproduces the file byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, defaults, parse, serialize, set_value, validate
from .experiments import (
    bichromatic_map,
    fit_bloch_parameters,
    fit_lorentzian,
    lzs_map,
    optical_rabi_trace,
    ple_scan,
    poisson_counts,
)
from .driving import AcDrive
from .fitting import EnvelopeFit, FitError
from .io import FORMATS, dumps_mapping, read_scan, scan_to_csv, scan_to_json, write_scan
from .lindblad import IntegrationError, OpticalBlochParams, PulseEnvelope
from .periodic import TrappingError
from .quantum import EigensolverError
from .results import Axis, ScanResult
from .spin import SpinSystemParams, axial_hyperfine, find_zefoz_field, transition_dispersion
from .spin_dynamics import NoiseModel, calibrate_ou_fit, hahn_echo, ramsey, readout_signal, spin_rabi

TWO_PI = 2.0 * math.pi
THREADS_ENV = "STUECKELBERG_THREADS"


def _rate(time_ns):
    """1/us from a time in ns; infinite time means no process."""
    return 0.0 if math.isinf(time_ns) else 1000.0 / time_ns


def _bloch(v):
    return OpticalBlochParams(
        rabi=TWO_PI * v["bloch.rabi_mhz"],
        t1=v["bloch.t1_ns"] / 1000.0,
        t2_star=v["bloch.t2_star_ns"] / 1000.0,
        gamma=_rate(v["bloch.trap_time_ns"]),
        repump=_rate(v["bloch.repump_time_ns"]),
        convention=v["bloch.dephasing"],
    )


def _window(v):
    return None if v["readout.mode"] == "cw" else v["readout.window_ns"] / 1000.0


def _spin_scan(res, name, v, unit="us"):
    bright, dark = v["readout.bright"], v["readout.dark"]
    ideal = bright == 1.0 and dark == 0.0
    return ScanResult(
        Axis(name, unit, res.x), readout_signal(res.signal, bright, dark), None,
        "population" if ideal else "pl", "1" if ideal else "arb", {"n_samples": res.n_samples},
        abs(bright - dark) * res.stderr if res.n_samples > 1 else None,
    )


# --------------------------------------------------------------------------
# runners: config -> ScanResult


def run_ple(cfg, threads=1, **_):
    v = cfg.values
    deltas = TWO_PI * np.linspace(v["scan.detuning_min_mhz"], v["scan.detuning_max_mhz"], v["scan.detuning_points"])
    drive = None
    if v["drive.amplitude_mhz"] > 0:
        drive = AcDrive.monochromatic(TWO_PI * v["drive.amplitude_mhz"], TWO_PI * v["drive.omega_mhz"])
    return ple_scan(deltas, _bloch(v), drive, _window(v), threads)


def run_lzs(cfg, threads=1, **_):
    v = cfg.values
    w = TWO_PI * v["drive.omega_mhz"]
    amps = w * np.linspace(v["scan.amp_over_omega_min"], v["scan.amp_over_omega_max"], v["scan.amp_points"])
    deltas = w * np.linspace(
        v["scan.detuning_min_over_omega"], v["scan.detuning_max_over_omega"], v["scan.detuning_points"]
    )
    return lzs_map(amps, deltas, w, _bloch(v), _window(v), threads)


def run_bichromatic(cfg, threads=1, **_):
    v = cfg.values
    w1 = TWO_PI * v["drive.omega1_mhz"]
    phis = np.linspace(0.0, TWO_PI, v["scan.phase_points"])
    deltas = w1 * np.linspace(
        v["scan.detuning_min_over_omega"], v["scan.detuning_max_over_omega"], v["scan.detuning_points"]
    )
    return bichromatic_map(
        phis, deltas, w1, _bloch(v), v["drive.x1"], v["drive.x2"], _window(v), v["scan.error_estimate"], threads
    )


def run_optical_rabi(cfg, **_):
    v = cfg.values
    pulse = PulseEnvelope(0.0, v["pulse.length_ns"] / 1000.0, v["pulse.shape"], v["pulse.rise_ns"] / 1000.0)
    trace = optical_rabi_trace(
        _bloch(v), TWO_PI * v["laser.detuning_mhz"], pulse, v["pulse.tail_ns"] / 1000.0,
        v["trace.bin_ns"] / 1000.0, v["trace.substeps"],
    )
    if v["noise.total_counts"] > 0:
        trace = poisson_counts(trace, v["noise.total_counts"], cfg.seed)
    return trace


def run_spin_rabi(cfg, **_):
    v = cfg.values
    full3level = v["mw.full3level"]
    durations = np.linspace(0.0, v["scan.duration_max_us"], v["scan.points"])
    res = spin_rabi(
        v["mw.transition"], TWO_PI * v["mw.rabi_mhz"], durations, full3level, v["spin.d_mhz"], v["spin.e_mhz"],
        v["mw.leakage"],
    )
    out = _spin_scan(res, "duration", cfg.values)
    out.metadata.update(experiment="spin-rabi", full3level=bool(full3level))
    return out


def _noise(v, seed, sigma=None):
    kind = v["noise.kind"]
    tau_c = v["noise.tau_c_us"] if kind == "ornstein_uhlenbeck" else None
    return NoiseModel(kind, v["noise.sigma_rad_per_us"] if sigma is None else sigma, tau_c, seed)


def run_ramsey(cfg, **_):
    v = cfg.values
    tau = np.linspace(0.0, v["scan.tau_max_us"], v["scan.points"])
    res = ramsey(tau, TWO_PI * v["ramsey.detuning_mhz"], _noise(v, cfg.seed), v["mc.shots"])
    out = _spin_scan(res, "tau", cfg.values)
    out.metadata.update(experiment="ramsey")
    return out


def run_echo(cfg, **_):
    v = cfg.values
    tau = np.linspace(0.0, v["scan.tau_max_us"], v["scan.points"])
    sigma = v["noise.sigma_rad_per_us"]
    if sigma == 0 and v["noise.kind"] == "ornstein_uhlenbeck":
        sigma = calibrate_ou_fit(v["echo.target_us"], v["noise.tau_c_us"], tau)
    res = hahn_echo(tau, _noise(v, cfg.seed, sigma), v["mc.shots"])
    out = _spin_scan(res, "tau", cfg.values)
    out.metadata.update(experiment="echo", sigma=sigma)
    return out


def zefoz_params(v):
    return SpinSystemParams(v["spin.d_mhz"], v["spin.e_mhz"], v["spin.g"], hyperfine=(axial_hyperfine(v["spin.azz_mhz"]),))


def run_zefoz(cfg, **_):
    v = cfg.values
    p = zefoz_params(v)
    b_star = find_zefoz_field(p, v["zefoz.branch"])
    bz = np.linspace(v["scan.bz_min_mt"], v["scan.bz_max_mt"], v["scan.points"])
    zp, pm = transition_dispersion(p, bz, v["zefoz.branch"])
    meta = {"experiment": "zefoz", "bz_star": b_star, "transitions": ["0<->+", "+<->-"]}
    return ScanResult(
        Axis("bz", "mT", bz), np.column_stack([zp, pm]), Axis("transition", "index", [0.0, 1.0]),
        "frequency", "MHz", meta,
    )


RUNNERS = {
    "ple": run_ple,
    "lzs": run_lzs,
    "bichromatic": run_bichromatic,
    "optical-rabi": run_optical_rabi,
    "spin-rabi": run_spin_rabi,
    "ramsey": run_ramsey,
    "echo": run_echo,
    "zefoz": run_zefoz,
}


def run(cfg, threads=1) -> ScanResult:
    """Run one configured experiment and embed the provenance in its metadata."""
    result = RUNNERS[cfg.experiment](cfg, threads=threads)
    result.metadata["config"] = serialize(cfg)
    result.metadata["seed"] = cfg.seed
    result.metadata["version"] = __version__
    result.metadata.setdefault("experiment", cfg.experiment)
    return result


# --------------------------------------------------------------------------
# fit subcommand


def run_fit(cfg):
    v = cfg.values
    scan = read_scan(v["fit.input"])
    model = v["fit.model"]
    if model == "lorentzian":
        r = fit_lorentzian(scan)
        return {"model": model, "center_mhz": r.center, "fwhm_mhz": r.fwhm, "amplitude": r.amplitude,
                "offset": r.offset, "multi_peak": bool(r.multi_peak)}
    if model == "bloch":
        if "pulse" not in scan.metadata:
            raise ValueError("Bloch fits need a JSON optical-rabi trace (CSV drops the pulse metadata)")
        r = fit_bloch_parameters(scan, TWO_PI * v["fit.rabi_mhz"], TWO_PI * v["fit.detuning_mhz"])
        return {"model": model, "t1_ns": 1000 * r.t1, "t2_ns": 1000 * r.t2, "t2_star_ns": 1000 * r.t2_star,
                "gamma_per_us": r.gamma, "amplitude": r.amplitude, "offset": r.offset}
    oscillating = scan.metadata.get("experiment") != "echo"
    est = EnvelopeFit(model=model, oscillating=oscillating).fit(scan.axis1.values, scan.values)
    return {"model": model, "decay": est.decay_, "decay_unit": scan.axis1.unit, "exponent": est.exponent_,
            "residual_rms": est.residual_}


# --------------------------------------------------------------------------
# argument handling


def _default_threads():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


def _load_config(path, experiment):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.lower().endswith(".json"):
        try:
            text = json.loads(text)["metadata"]["config"]
        except (ValueError, KeyError, TypeError):
            raise ConfigError(f"{path}: JSON file carries no embedded configuration") from None
    return parse(text, experiment, source=path)


def build_config(args):
    cfg = _load_config(args.config, args.command) if args.config else defaults(args.command)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        set_value(cfg, key, raw, where="--set")
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "full3level", False):
        cfg.values["mw.full3level"] = True
    return validate(cfg)


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file, or a JSON result to rerun")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=FORMATS, help="output format (default: from --out suffix, else csv)")
    common.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    common.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")

    parser = argparse.ArgumentParser(prog="stueckelberg", description="Driven-defect spectroscopy simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ple": "photoluminescence excitation spectrum",
        "lzs": "Stark-amplitude versus detuning emission map",
        "bichromatic": "octave-drive phase versus detuning map",
        "optical-rabi": "time-resolved optical Rabi trace",
        "spin-rabi": "ground-state spin Rabi oscillation",
        "ramsey": "Ramsey fringe with classical noise",
        "echo": "Hahn echo with classical noise",
        "zefoz": "ZEFOZ field and transition dispersion",
        "fit": "fit a saved scan",
    }
    for name in EXPERIMENTS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "spin-rabi":
            p.add_argument("--full3level", action="store_true", help="keep the spectator level (mw.full3level)")
    sub.add_parser("selftest", help="run built-in property checks")
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        from .selftest import main as selftest_main

        return selftest_main()
    try:
        cfg = build_config(args)
        threads = args.threads if args.threads is not None else _default_threads()
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
    except (ConfigError, OSError) as err:
        print(f"stueckelberg: error: {err}", file=sys.stderr)
        return 2
    if args.dump_config:
        sys.stdout.write(serialize(cfg))
        return 0
    try:
        if cfg.experiment == "fit":
            report = run_fit(cfg)
            for k, v in report.items():
                print(f"{k} = {v}", file=sys.stderr if args.out is None else sys.stdout)
            _emit(dumps_mapping(report), args.out)
            return 0
        result = run(cfg, threads)
    except (IntegrationError, TrappingError, FitError, EigensolverError, ValueError, OSError) as err:
        print(f"stueckelberg: {cfg.experiment} failed: {err}", file=sys.stderr)
        return 1
    if cfg.experiment == "zefoz":
        print(f"B_z* = {result.metadata['bz_star']:.9f} mT", file=sys.stderr if args.out is None else sys.stdout)
    if args.out:
        write_scan(result, args.out, args.format)
    else:
        sys.stdout.write(scan_to_json(result) if args.format == "json" else scan_to_csv(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
