import math

import numpy as np
import pytest
from scipy.special import jv

from stueckelberg.driving import AcDrive
from stueckelberg.experiments import (
    FineStructureParams,
    band_integrated_intensity,
    bichromatic_map,
    find_resonances,
    fit_bloch_parameters,
    fit_lorentzian,
    lzs_map,
    optical_rabi_trace,
    ple_scan,
    poisson_counts,
    predict_ple_lines,
    rabi_from_power,
    saturation_fwhm,
)
from stueckelberg.fitting import lorentzian
from stueckelberg.lindblad import OpticalBlochParams, PulseEnvelope, evolve
from stueckelberg.results import Axis, ScanResult

W = 2 * math.pi
WEAK = OpticalBlochParams(rabi=0.02 * W, t1=1.0)  # saturation s = 0.03


def test_ple_without_drive_is_saturated_lorentzian():
    p = OpticalBlochParams(rabi=0.2, t1=1.0, t2_star=2.0)
    deltas = np.linspace(-20, 20, 801)
    scan = ple_scan(deltas, p)
    fit = fit_lorentzian(scan)
    assert fit.center == pytest.approx(0.0, abs=1e-9)
    assert fit.fwhm == pytest.approx(saturation_fwhm(p) / W, rel=1e-6)
    assert scan.metadata["diagnostics"]["min_eigenvalue"] > -1e-12


def test_fit_lorentzian_units():
    x = np.linspace(-5, 5, 201)
    mhz = ScanResult(Axis("detuning", "MHz", x), lorentzian(x, 1.0, 0.5, 1.0, 0.0))
    rad = ScanResult(Axis("detuning", "rad/us", W * x), lorentzian(x, 1.0, 0.5, 1.0, 0.0))
    assert fit_lorentzian(mhz).center == pytest.approx(1.0)
    assert fit_lorentzian(rad).fwhm == pytest.approx(0.5)
    with pytest.raises(ValueError, match="MHz"):
        fit_lorentzian(ScanResult(Axis("t", "us", x), x**0))


def test_sidebands_follow_bessel_weights():
    # weak drive, resolved sidebands: peak heights ~ J_n(x)^2; saturation and
    # neighbouring tails each contribute a few percent
    omega, x = W, 1.5
    drive = AcDrive.monochromatic(x * omega, omega)
    deltas = np.array([n * omega for n in range(-3, 4)])
    peaks = ple_scan(deltas, WEAK, drive).values
    static = ple_scan([0.0], WEAK).values[0]
    expected = jv(np.arange(-3, 4), x) ** 2 * static
    assert np.allclose(peaks, expected, rtol=5e-2, atol=2e-3 * static)


def test_find_resonances_locates_sidebands():
    omega = W
    drive = AcDrive.monochromatic(1.0 * omega, omega)
    deltas = np.linspace(-3.5 * omega, 3.5 * omega, 701)
    scan = ple_scan(deltas, WEAK, drive)
    pos, hgt = find_resonances(deltas, scan.values)
    assert np.allclose(np.sort(pos) / omega, np.round(np.sort(pos) / omega), atol=2e-3)
    assert set(np.round(pos / omega).astype(int)) >= {-2, -1, 0, 1, 2}


def test_lzs_map_rows_and_band_integration():
    omega = W
    amps = np.array([0.0, 1.0, 2.0]) * omega
    deltas = np.linspace(-4 * omega, 4 * omega, 161)
    m = lzs_map(amps, deltas, omega, WEAK)
    assert m.values.shape == (3, 161)
    assert m.axis1.unit == "rad/us" and m.axis2.name == "detuning"
    band0 = band_integrated_intensity(m, 0, omega)
    # zero amplitude: all weight in the central band
    assert band0[0] > band0[1] > 0
    with pytest.raises(ValueError, match="outside"):
        band_integrated_intensity(m, 4, omega)


def test_lzs_map_rejects_coarse_dt():
    with pytest.raises(ValueError, match="resolve"):
        lzs_map([0.0], [0.0], W, WEAK, dt=1.0)


def test_band_integration_needs_map():
    s = ScanResult(Axis("d", "rad/us", [0.0, 1.0]), [1.0, 2.0])
    with pytest.raises(ValueError, match="2-D"):
        band_integrated_intensity(s, 0, 1.0)


def test_bichromatic_map_shape_and_error_estimate():
    phis = np.linspace(0, W, 5)
    deltas = np.linspace(-2 * W, 2 * W, 41)
    m = bichromatic_map(phis, deltas, W, WEAK, x1=1.0, x2=0.5)
    assert m.values.shape == (5, 41)
    assert m.uncertainty is not None and np.all(m.uncertainty >= 0)
    assert np.max(m.uncertainty) < 1e-3 * np.max(m.values)
    # phi = 0 and phi = 2 pi give the same drive
    assert np.allclose(m.values[0], m.values[-1], rtol=1e-9)
    with pytest.raises(ValueError, match="cover"):
        bichromatic_map(np.linspace(0, 1, 3), deltas, W, WEAK)


def test_optical_rabi_matches_direct_evolution():
    p = OpticalBlochParams(rabi=W * 100, t1=0.014)
    trace = optical_rabi_trace(p, 0.0, PulseEnvelope(0.0, 0.02), tail=0.01, bin_width=0.001)
    rho0 = np.diag([1.0, 0, 0]).astype(complex)
    grid = np.concatenate([[0.0], trace.axis1.values])
    ref = evolve(rho0, p.model(0.0, envelope=PulseEnvelope(0.0, 0.02)), grid, 1e-5)
    assert np.allclose(trace.values, ref.population(1)[1:] / p.t1, rtol=1e-5, atol=1e-6 / p.t1)
    assert trace.axis1.values[0] == pytest.approx(0.0005)


def test_smoothed_pulse_trace_uses_general_path():
    p = OpticalBlochParams(rabi=W * 50, t1=0.014)
    pulse = PulseEnvelope(0.005, 0.03, "smoothed", 0.002)
    trace = optical_rabi_trace(p, 0.0, pulse, tail=0.01)
    assert trace.values[0] < 1e-3 * trace.values.max()
    with pytest.raises(ValueError, match="even"):
        optical_rabi_trace(p, 0.0, pulse, substeps=3)


def test_poisson_counts_are_reproducible():
    p = OpticalBlochParams(rabi=W * 100, t1=0.014)
    trace = optical_rabi_trace(p)
    a = poisson_counts(trace, 1e5, seed=1)
    b = poisson_counts(trace, 1e5, seed=1)
    assert np.array_equal(a.values, b.values)
    assert a.values.sum() == pytest.approx(1e5, rel=0.02)
    assert a.value_name == "counts"


def test_bloch_fit_round_trip():
    truth = OpticalBlochParams(rabi=W * 100, t1=0.014, t2_star=0.05, gamma=2.0)
    trace = optical_rabi_trace(truth)
    r = fit_bloch_parameters(trace, truth.rabi)
    assert r.t1 == pytest.approx(truth.t1, rel=1e-3)
    assert r.t2 == pytest.approx(truth.t2, rel=1e-3)
    assert r.gamma == pytest.approx(2.0, rel=1e-2)


def test_bloch_fit_needs_rabi_periods_and_metadata():
    trace = optical_rabi_trace(OpticalBlochParams(rabi=W * 10, t1=0.014))
    with pytest.raises(ValueError, match="Rabi periods"):
        fit_bloch_parameters(trace, W * 10)
    bare = ScanResult(trace.axis1, trace.values)
    with pytest.raises(ValueError, match="metadata"):
        fit_bloch_parameters(bare, W * 100)


def test_rabi_from_power():
    assert rabi_from_power(4.0, 3.0) == 6.0
    with pytest.raises(ValueError):
        rabi_from_power(-1.0, 1.0)


def test_ple_lines_vanish_for_identical_fine_structure():
    fs = FineStructureParams(1333.9535, 18.4195, 1333.9535, 18.4195)
    assert predict_ple_lines(fs) == pytest.approx((0.0, 0.0, 0.0))


def test_ple_lines_from_splittings():
    fs = FineStructureParams.from_transitions(1352.373, 36.839, 1000.0, 10.0)
    assert fs.d_gs == pytest.approx(1333.9535) and fs.e_gs == pytest.approx(18.4195)
    lines = predict_ple_lines(fs)
    assert lines.plus == pytest.approx((1000.0 + 10.0) - 1352.373)
    assert lines.minus == pytest.approx((1000.0 - 10.0) - (1333.9535 - 18.4195))


def test_grids_must_increase():
    with pytest.raises(ValueError, match="increasing"):
        ple_scan([0.0, 0.0], WEAK)
