"""Figure-level numerical experiments and their analysis.

Scans take angular frequencies (rad/us) and times in us; results are
returned as :class:`~stueckelberg.results.ScanResult`.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .driving import AcDrive
from .fitting import BlochFit, LorentzianFit, noise_floor
from .lindblad import (
    OpticalBlochParams,
    PulseEnvelope,
    evolve,
    max_stable_step,
    rk4_step_matrix,
    t2_from,
)
from .periodic import (
    DEFAULT_THETA,
    coordinates_to_states,
    driven_emission,
    frame_generators,
    static_emission,
)
from .quantum import check_density_matrices
from .results import Axis, ScanResult
from .spin import zefoz_basis

TWO_PI = 2.0 * math.pi
BESSEL_ZERO = 2.404825557695773

# --------------------------------------------------------------------------
# helpers


def _monotone(grid, name):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError(f"{name} grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) <= 0):
        raise ValueError(f"{name} grid must be strictly increasing")
    return grid


def physicality(states):
    """Worst trace drift, Hermiticity error and smallest eigenvalue of a state stack."""
    tr, herm, lo = check_density_matrices(states, 0, 0, 0)
    return {"trace_drift": tr, "hermiticity": herm, "min_eigenvalue": lo}


def _merge(diag, new):
    if not diag:
        return dict(new)
    return {
        "trace_drift": max(diag["trace_drift"], new["trace_drift"]),
        "hermiticity": max(diag["hermiticity"], new["hermiticity"]),
        "min_eigenvalue": min(diag["min_eigenvalue"], new["min_eigenvalue"]),
    }


def _bloch_meta(p: OpticalBlochParams):
    return {
        "rabi": p.rabi, "t1": p.t1, "t2_star": p.t2_star, "gamma": p.gamma,
        "repump": p.repump, "convention": p.convention,
    }


def _emission_unit(readout_window):
    return ("emission_rate", "1/us") if readout_window is None else ("emission", "photons")


# --------------------------------------------------------------------------
# spectra and maps


def ple_scan(deltas, bloch: OpticalBlochParams, drive: AcDrive | None = None, readout_window=None,
             threads=1, theta=DEFAULT_THETA) -> ScanResult:
    """Emission versus laser detuning.

    ``readout_window=None`` gives the continuous-wave emission rate (needs a
    non-trapping model); a window (us) gives the photons emitted from
    ``|g>`` during a readout pulse of that length.
    """
    deltas = _monotone(deltas, "detuning")
    if drive is None or all(t.amplitude == 0 for t in drive.tones):
        res = static_emission(deltas, bloch, readout_window)
    else:
        res = driven_emission(deltas, drive, bloch, readout_window, threads, theta)
    states = coordinates_to_states(res.states, frame_generators(bloch))
    name, unit = _emission_unit(readout_window)
    meta = {
        "experiment": "ple",
        "bloch": _bloch_meta(bloch),
        "readout_window": readout_window,
        "drive": None if drive is None else [[t.amplitude, t.omega, t.phase] for t in drive.tones],
        "diagnostics": physicality(states),
    }
    return ScanResult(Axis("detuning", "rad/us", deltas), res.values, None, name, unit, meta)


def lzs_map(amps, deltas, omega, bloch: OpticalBlochParams, readout_window=None, threads=1,
            dt=None, theta=DEFAULT_THETA) -> ScanResult:
    """Emission map over Stark amplitude (axis 1) and laser detuning (axis 2).

    Every point integrates the driven model over whole drive periods with at
    least 40 RK4 steps per period. An explicit ``dt`` is only checked against
    that resolution bound ``2 pi/(40 omega)``.
    """
    amps = _monotone(amps, "amplitude")
    deltas = _monotone(deltas, "detuning")
    if not omega > 0:
        raise ValueError("drive frequency must be positive")
    if dt is not None and dt > TWO_PI / (40.0 * omega) * (1 + 1e-12):
        raise ValueError(f"dt={dt} does not resolve the drive (need <= 2 pi/(40 omega))")
    values = np.empty((amps.size, deltas.size))
    diag = {}
    gens = frame_generators(bloch)
    for i, a in enumerate(amps):
        res = driven_emission(deltas, AcDrive.monochromatic(a, omega), bloch, readout_window, threads, theta)
        values[i] = res.values
        diag = _merge(diag, physicality(coordinates_to_states(res.states, gens)))
    name, unit = _emission_unit(readout_window)
    meta = {
        "experiment": "lzs",
        "omega": omega,
        "bloch": _bloch_meta(bloch),
        "readout_window": readout_window,
        "diagnostics": diag,
    }
    return ScanResult(
        Axis("amplitude", "rad/us", amps), values, Axis("detuning", "rad/us", deltas), name, unit, meta
    )


def band_integrated_intensity(scan: ScanResult, n, omega):
    """Integrate each amplitude row over ``delta in [n w - w/2, n w + w/2]``."""
    if scan.axis2 is None:
        raise ValueError("band integration needs a 2-D map")
    d = scan.axis2.values
    lo, hi = n * omega - 0.5 * omega, n * omega + 0.5 * omega
    tol = 1e-9 * max(abs(lo), abs(hi), omega)
    if lo < d[0] - tol or hi > d[-1] + tol:
        raise ValueError(f"band [{lo:.6g}, {hi:.6g}] lies outside the scanned detunings")
    inner = d[(d > lo) & (d < hi)]
    grid = np.concatenate([[lo], inner, [hi]])
    rows = np.array([np.interp(grid, d, row) for row in scan.values])
    return np.trapezoid(rows, grid, axis=1)


def bichromatic_map(phis, deltas, omega1, bloch: OpticalBlochParams, x1=BESSEL_ZERO, x2=BESSEL_ZERO,
                    readout_window=None, error_estimate=True, threads=1, theta=DEFAULT_THETA) -> ScanResult:
    """Emission over drive phase (axis 1) and detuning (axis 2) for an octave pair.

    The drive is ``x1 w1 cos(w1 t) + x2 (2 w1) cos(2 w1 t + phi)``. With
    ``error_estimate`` each point is also run with half the step and the
    reported values come from the finer run; ``uncertainty`` is the
    step-halving estimate ``|v_h - v_{h/2}|/15``.

    Labelling: the resonance at ``delta = n w1`` absorbs ``-n`` drive quanta in
    this sign convention, so its weak-drive height follows
    ``|J_{-n}(x1, x2; phi)|^2 = |J_n(x1, x2; phi + pi)|^2``, a fixed phase
    offset of ``pi`` relative to ``|J_n(phi)|^2``.
    """
    phis = _monotone(phis, "phase")
    deltas = _monotone(deltas, "detuning")
    if phis[0] > 1e-12 or phis[-1] < TWO_PI - 1e-9:
        raise ValueError("phase grid must cover [0, 2 pi]")
    values = np.empty((phis.size, deltas.size))
    err = np.zeros_like(values) if error_estimate else None
    gens = frame_generators(bloch)
    diag = {}
    for i, phi in enumerate(phis):
        drive = AcDrive.octave(x1 * omega1, omega1, x2 * 2.0 * omega1, phi)
        fine = driven_emission(deltas, drive, bloch, readout_window, threads, theta,
                               step_factor=2 if error_estimate else 1)
        values[i] = fine.values
        diag = _merge(diag, physicality(coordinates_to_states(fine.states, gens)))
        if error_estimate:
            coarse = driven_emission(deltas, drive, bloch, readout_window, threads, theta)
            err[i] = np.abs(coarse.values - fine.values) / 15.0
    name, unit = _emission_unit(readout_window)
    meta = {
        "experiment": "bichromatic",
        "omega1": omega1, "x1": x1, "x2": x2,
        "bloch": _bloch_meta(bloch),
        "readout_window": readout_window,
        "diagnostics": diag,
    }
    return ScanResult(
        Axis("phase", "rad", phis), values, Axis("detuning", "rad/us", deltas), name, unit, meta, err
    )


def find_resonances(grid, values, factor=3.0, floor=None):
    """Local maxima rising ``factor`` noise floors above the median level.

    Positions are refined with a three-point parabola. Returns
    ``(positions, heights)``.
    """
    grid = np.asarray(grid, dtype=float)
    y = np.asarray(values, dtype=float)
    if floor is None:
        floor = noise_floor(y)
    floor = max(floor, 1e-12 * float(np.max(np.abs(y))))
    base = float(np.median(y))
    k = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    k = k[y[k] - base > factor * floor]
    pos, hgt = [], []
    for i in k:
        ym, y0, yp = y[i - 1], y[i], y[i + 1]
        denom = ym - 2 * y0 + yp
        shift = 0.5 * (ym - yp) / denom if denom != 0 else 0.0
        step = 0.5 * (grid[i + 1] - grid[i - 1])
        pos.append(grid[i] + shift * step)
        hgt.append(y0 - 0.25 * (ym - yp) * shift)
    return np.array(pos), np.array(hgt)


# --------------------------------------------------------------------------
# optical Rabi traces and Bloch fits


def rabi_from_power(power_uw, rabi_per_sqrt_uw):
    """``Omega = k sqrt(P)``; ``k`` (rad/us per sqrt(uW)) is a calibration input."""
    if power_uw < 0:
        raise ValueError("power must be >= 0")
    return rabi_per_sqrt_uw * math.sqrt(power_uw)


def _piecewise_constant_trace(bloch, detuning, pulse, times, h, substeps):
    """Bin-centre populations for a rectangular pulse using two fixed step matrices."""
    gens = frame_generators(bloch)
    on = gens.static(detuning)
    off = gens.ld + detuning * gens.lz
    m_on = rk4_step_matrix(on, on, on, h)
    m_off = rk4_step_matrix(off, off, off, h)
    x = gens.ground.copy()
    n_total = int(round(times[-1] / h))
    wanted = {int(round(t / h)): k for k, t in enumerate(times)}
    out = np.empty((times.size, gens.dim))
    for step in range(n_total + 1):
        k = wanted.get(step)
        if k is not None:
            out[k] = x
        if step == n_total:
            break
        mid = (step + 0.5) * h
        x = (m_on if pulse.t_on <= mid < pulse.t_off else m_off) @ x
    return coordinates_to_states(out, gens)


def optical_rabi_trace(bloch: OpticalBlochParams, detuning=0.0, pulse: PulseEnvelope | None = None,
                       tail=0.040, bin_width=0.001, substeps=10) -> ScanResult:
    """Emission rate ``rho_ee/T1`` at the centres of ``bin_width`` bins.

    The system starts in ``|g>`` at ``t = 0``; the trace spans the pulse
    (default 80 ns rectangular) plus ``tail``.
    """
    pulse = pulse or PulseEnvelope(0.0, 0.080)
    if substeps < 2 or substeps % 2:
        raise ValueError("substeps must be a positive even number")
    t_end = pulse.t_off + tail
    n_bins = int(round(t_end / bin_width))
    times = (np.arange(n_bins) + 0.5) * bin_width
    h = bin_width / substeps
    model = bloch.model(detuning, envelope=pulse)
    limit = max_stable_step(model)
    edges_on_grid = all(abs(e / h - round(e / h)) < 1e-9 for e in (pulse.t_on, pulse.t_off))
    if pulse.shape == "rectangular" and edges_on_grid and h <= limit:
        states = _piecewise_constant_trace(bloch, detuning, pulse, times, h, substeps)
    else:
        rho0 = np.zeros((3, 3), complex)
        rho0[0, 0] = 1.0
        grid = np.concatenate([[0.0], times])
        traj = evolve(rho0, model, grid, min(h, limit))
        states = traj.states[1:]
    values = states[:, 1, 1].real / bloch.t1
    meta = {
        "experiment": "optical-rabi",
        "bloch": _bloch_meta(bloch),
        "detuning": detuning,
        "pulse": {"t_on": pulse.t_on, "t_off": pulse.t_off, "shape": pulse.shape, "rise": pulse.rise},
        "tail": tail, "bin_width": bin_width, "substeps": substeps,
        "diagnostics": physicality(states),
    }
    return ScanResult(Axis("time", "us", times), values, None, "emission_rate", "1/us", meta)


def poisson_counts(trace: ScanResult, total_counts, seed=0):
    """Poisson-sample a trace rescaled to ``total_counts`` expected counts."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    lam = trace.values / trace.values.sum() * total_counts
    counts = rng.poisson(lam).astype(float)
    meta = dict(trace.metadata, total_counts=total_counts, seed=seed)
    return ScanResult(trace.axis1, counts, None, "counts", "counts", meta)


BlochFitResult = namedtuple("BlochFitResult", "t1 t2 t2_star gamma amplitude offset estimator")


def fit_bloch_parameters(trace: ScanResult, rabi, detuning=0.0, weighted=None, n_starts=3):
    """Recover ``(T1, T2, Gamma)`` from an optical Rabi trace.

    The simulator itself is the forward model; the pulse and binning are
    read from the trace metadata. Count traces are weighted by ``1/counts``
    unless ``weighted`` says otherwise.
    """
    meta = trace.metadata
    try:
        pm = meta["pulse"]
        tail, bin_width, substeps = meta["tail"], meta["bin_width"], meta["substeps"]
    except KeyError as err:
        raise ValueError(f"trace metadata lacks {err}; it must come from optical_rabi_trace") from None
    pulse = PulseEnvelope(pm["t_on"], pm["t_off"], pm["shape"], pm["rise"])
    t = trace.axis1.values
    convention = meta.get("bloch", {}).get("convention", "relation")
    n_periods = rabi * (pulse.t_off - pulse.t_on) / TWO_PI
    if n_periods < 3:
        raise ValueError(f"trace covers {n_periods:.2f} Rabi periods; need at least 3")

    def forward(t1, t2_star, gamma):
        p = OpticalBlochParams(rabi, t1, t2_star, gamma, convention=convention)
        return optical_rabi_trace(p, detuning, pulse, tail, bin_width, substeps).values

    if weighted is None:
        weighted = trace.value_name == "counts"
    weight = 1.0 / np.maximum(trace.values, 1.0) if weighted else None
    est = BlochFit(forward=forward, tail_start=pulse.t_off, n_starts=n_starts).fit(t, trace.values, weight)
    return BlochFitResult(est.t1_, est.t2_, est.t2_star_, est.gamma_, est.amplitude_, est.offset_, est)


# --------------------------------------------------------------------------
# line shapes and line positions

LorentzianResult = namedtuple("LorentzianResult", "center fwhm amplitude offset multi_peak estimator")


def fit_lorentzian(spectrum: ScanResult, noise=None) -> LorentzianResult:
    """Lorentzian fit; ``center`` and ``fwhm`` are returned in MHz."""
    if spectrum.is_map:
        raise ValueError("fit_lorentzian needs a 1-D spectrum")
    unit = spectrum.axis1.unit
    scale = {"rad/us": 1.0 / TWO_PI, "MHz": 1.0}.get(unit)
    if scale is None:
        raise ValueError(f"cannot express axis unit {unit!r} in MHz")
    est = LorentzianFit(noise=noise).fit(spectrum.axis1.values, spectrum.values)
    return LorentzianResult(
        est.center_ * scale, est.fwhm_ * scale, est.amplitude_, est.offset_, est.multi_peak_, est
    )


def saturation_fwhm(bloch: OpticalBlochParams):
    """Power-broadened angular FWHM ``2 sqrt(1/T2^2 + Omega^2 T1/T2)``."""
    t2 = t2_from(bloch.t1, bloch.t2_star)
    return 2.0 * math.sqrt(1.0 / t2**2 + bloch.rabi**2 * bloch.t1 / t2)


@dataclass(frozen=True)
class FineStructureParams:
    """Ground- and excited-state zero-field splittings (MHz)."""

    d_gs: float
    e_gs: float
    d_es: float
    e_es: float

    def __post_init__(self):
        for name in ("d_gs", "e_gs", "d_es", "e_es"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_transitions(cls, d_plus_e_gs, two_e_gs, d_es, e_es):
        """Ground state from the ``0<->+`` and ``+<->-`` transition frequencies."""
        e = 0.5 * two_e_gs
        return cls(d_plus_e_gs - e, e, d_es, e_es)


PleLines = namedtuple("PleLines", "zero plus minus")


def predict_ple_lines(fs: FineStructureParams) -> PleLines:
    """Spin-conserving optical lines relative to ``|0> <-> |A'_0>`` (MHz)."""
    gs = zefoz_basis(fs.d_gs, fs.e_gs)
    es = zefoz_basis(fs.d_es, fs.e_es)
    g = dict(zip(gs.labels, gs.energies))
    e = dict(zip(es.labels, es.energies))
    ref = e["0"] - g["0"]
    return PleLines(0.0, (e["+"] - g["+"]) - ref, (e["-"] - g["-"]) - ref)
