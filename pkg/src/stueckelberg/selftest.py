"""Fast built-in property checks (``stueckelberg selftest``).

Each check returns a short detail string and raises ``AssertionError`` on
failure. The exit status is non-zero iff any check fails.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np

from .bessel import bessel_sideband_ladder, generalized_bessel_2d, generalized_bessel_ladder
from .config import defaults, parse, serialize
from .driving import OpticalTLSParams, rotating_frame_hamiltonian
from .experiments import physicality, ple_scan, predict_ple_lines, FineStructureParams
from .fitting import LorentzianFit
from .io import scan_from_csv, scan_from_json, scan_to_csv, scan_to_json
from .lindblad import LindbladModel, OpticalBlochParams, evolve, steady_state, t2_from
from .quantum import DensityMatrix, eigendecompose_hermitian
from .spin import (
    SpinSystemParams,
    analytic_spectrum,
    axial_hyperfine,
    build_ground_hamiltonian,
    find_zefoz_field,
    zefoz_basis,
)
from .spin_dynamics import NoiseModel, quasi_static_sigma, ramsey


def _rabi():
    om = 2 * math.pi
    period = 2 * math.pi / om
    model = LindbladModel(2, h0=rotating_frame_hamiltonian(OpticalTLSParams(om)).matrix)
    ts = np.linspace(0, 2 * period, 101)
    traj = evolve(DensityMatrix.basis(2, 0), model, ts, period / 200)
    err = np.max(np.abs(traj.population(1) - np.sin(om * ts / 2) ** 2))
    assert err < 1e-6, f"error {err:.2e}"
    return f"max error {err:.1e}"


def _physical():
    p = OpticalBlochParams(2 * math.pi, 1.0, 2.0, 0.05, 0.5)
    traj = evolve(np.diag([1.0, 0, 0]).astype(complex), p.model(0.3), np.linspace(0, 5, 51), 0.01)
    d = physicality(traj.states)
    assert d["trace_drift"] <= 1e-7 and d["hermiticity"] <= 1e-10 and d["min_eigenvalue"] >= -1e-7, d
    return f"min eigenvalue {d['min_eigenvalue']:.1e}"


def _saturation():
    om, dl, t1, t2s = 3.0, 1.0, 1.0, 3.0
    t2 = t2_from(t1, t2s)
    ss = steady_state(OpticalBlochParams(om, t1, t2s).model(dl))
    exact = 0.5 * om**2 * t1 * t2 / (1 + dl**2 * t2**2 + om**2 * t1 * t2)
    err = abs(ss.state.population(1) - exact)
    assert err < 1e-12, f"error {err:.2e}"
    return f"error {err:.1e}"


def _bessel():
    x1, x2, phi = 2.1, 1.3, 0.7
    g = generalized_bessel_ladder(x1, x2, phi, 40)
    norm = np.sum(np.abs(g) ** 2)
    reduced = generalized_bessel_ladder(x1, 0.0, phi, 10)
    assert abs(norm - 1) < 1e-12, f"sum |G_n|^2 = {norm}"
    assert np.max(np.abs(reduced - bessel_sideband_ladder(x1, 10))) < 1e-14
    t = 2 * math.pi * np.arange(4096) / 4096
    quad = np.mean(np.exp(-1j * (x1 * np.sin(t) + x2 * np.sin(2 * t + phi)) + 3j * t))
    assert abs(quad - generalized_bessel_2d(3, x1, x2, phi)) < 1e-12
    return f"Parseval defect {abs(norm - 1):.1e}"


def _spin_spectrum():
    p = SpinSystemParams(1333.9535, 18.4195, 2.0, (0, 0, 0.2), (axial_hyperfine(1.0),))
    w, _ = eigendecompose_hermitian(build_ground_hamiltonian(p))
    a = analytic_spectrum(p)
    err = np.max(np.abs(np.sort(a.energies + a.offset) - np.sort(w))) / np.max(np.abs(w))
    assert err < 1e-9, f"relative error {err:.1e}"
    return f"relative error {err:.1e}"


def _zefoz():
    p = SpinSystemParams(1333.9535, 18.4195, 2.0, hyperfine=(axial_hyperfine(1.0),))
    b = find_zefoz_field(p)
    exact = -1.0 / p.gamma
    assert abs(b - exact) < 1e-6, f"{b} vs {exact}"
    zb = zefoz_basis(1333.9535, 18.4195)
    assert np.allclose(np.diag(zb.h_diag).real, [1333.9535 + 18.4195, 0, 1333.9535 - 18.4195], rtol=0, atol=1e-12)
    return f"B_z* = {b:.6f} mT"


def _lines():
    lines = predict_ple_lines(FineStructureParams.from_transitions(1352.373, 36.839, 970.0, -483.0))
    assert abs(lines.plus + 865.373) < 1e-9 and abs(lines.minus - 137.466) < 1e-9, lines
    return f"{lines.plus:.3f}, {lines.minus:.3f} MHz"


def _scale():
    p = OpticalBlochParams(2 * math.pi * 0.5, 0.5, 1.0)
    d = np.linspace(-10, 10, 41)
    base = ple_scan(d, p).values
    err = 0.0
    for lam in (0.1, 10.0):
        v = ple_scan(d * lam, p.scaled(lam)).values
        err = max(err, np.max(np.abs(v / v.max() - base / base.max())))
    assert err < 1e-6, f"deviation {err:.1e}"
    return f"deviation {err:.1e}"


def _config():
    cfg = defaults("lzs")
    cfg.seed = 11
    text = serialize(cfg)
    again = parse(text)
    assert again == cfg and serialize(again) == text
    return "round trip exact"


def _files():
    p = OpticalBlochParams(2 * math.pi, 1.0)
    scan = ple_scan(np.linspace(-5, 5, 11), p)
    assert scan_from_json(scan_to_json(scan)) == scan
    back = scan_from_csv(scan_to_csv(scan))
    assert np.array_equal(back.values, scan.values) and back.axis1 == scan.axis1
    return "csv and json round trip"


def _lorentzian():
    x = np.linspace(-50, 50, 201)
    y = 0.1 + 2.0 / (1 + ((x - 3.0) / 10.5) ** 2)
    est = LorentzianFit().fit(x, y)
    assert abs(est.fwhm_ - 21.0) < 1e-6 and abs(est.center_ - 3.0) < 1e-6
    return f"FWHM {est.fwhm_:.6f}"


def _ramsey():
    t2s = 74.0
    tau = np.linspace(0, 150, 31)
    res = ramsey(tau, 0.0, NoiseModel("quasi_static_gaussian", quasi_static_sigma(t2s), seed=5), 4000)
    exact = 0.5 * (1 + np.exp(-((tau / t2s) ** 2)))
    z = np.max(np.abs(res.signal - exact) / np.maximum(res.stderr, 1e-12))
    assert z < 5, f"deviation {z:.1f} standard errors"
    return f"max deviation {z:.1f} standard errors"


CHECKS = (
    ("closed-system Rabi oscillation", _rabi),
    ("density-matrix physicality", _physical),
    ("steady-state saturation formula", _saturation),
    ("generalized Bessel identities", _bessel),
    ("spin spectrum analytic vs numeric", _spin_spectrum),
    ("ZEFOZ field and eigenbasis", _zefoz),
    ("PLE line prediction", _lines),
    ("scale invariance", _scale),
    ("config round trip", _config),
    ("scan file round trip", _files),
    ("Lorentzian fit", _lorentzian),
    ("Ramsey Monte Carlo", _ramsey),
)


def run_checks(out=sys.stdout):
    failed = 0
    for name, check in CHECKS:
        t0 = time.perf_counter()
        try:
            detail = check()
            status = "PASS"
        except Exception as err:  # report every failure, keep going
            detail = f"{type(err).__name__}: {err}"
            status = "FAIL"
            failed += 1
        print(f"{status} {name}: {detail} ({time.perf_counter() - t0:.2f} s)", file=out)
    print(f"{len(CHECKS) - failed}/{len(CHECKS)} checks passed", file=out)
    return failed


def main():
    return 1 if run_checks() else 0
