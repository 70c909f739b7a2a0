import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jv

from stueckelberg.bessel import (
    bessel_jn,
    bessel_ladder,
    bessel_sideband_ladder,
    generalized_bessel_2d,
    generalized_bessel_ladder,
)

N_QUAD = 4096
_T = 2 * math.pi * np.arange(N_QUAD) / N_QUAD


def quadrature(n, x1, x2, phi):
    """Fourier coefficient of exp(-i[x1 sin t + x2 sin(2t + phi)]), trapezoid rule."""
    return np.mean(np.exp(-1j * (x1 * np.sin(_T) + x2 * np.sin(2 * _T + phi)) + 1j * n * _T))


@pytest.mark.parametrize("x", [0.0, 1e-8, 0.5, 2.404825557695773, 10.0, 37.5, 120.0])
def test_ladder_matches_scipy(x):
    n_max = int(x) + 30
    ours = bessel_ladder(x, n_max)
    assert np.allclose(ours, jv(np.arange(n_max + 1), x), rtol=1e-10, atol=1e-13)


@settings(max_examples=80, deadline=None)
@given(st.integers(-40, 40), st.floats(-60, 60))
def test_single_order_matches_scipy(n, x):
    assert bessel_jn(n, x) == pytest.approx(jv(n, x), rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("zero", [2.404825557695773, 5.520078110286311, 8.653727912911013])
def test_j0_zeros(zero):
    assert abs(bessel_jn(0, zero)) < 1e-14


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 50))
def test_recurrence_and_normalisation(x):
    ladder = bessel_sideband_ladder(x, int(x) + 40)
    assert np.sum(ladder**2) == pytest.approx(1.0, abs=1e-12)
    n_max = int(x) + 40
    n = np.arange(-n_max + 1, n_max)
    mid = ladder[1:-1]
    assert np.allclose(ladder[:-2] + ladder[2:], 2 * n / x * mid, atol=1e-12)


def test_negative_orders():
    ladder = bessel_sideband_ladder(3.3, 6)
    for n in range(1, 7):
        assert ladder[6 - n] == pytest.approx((-1) ** n * ladder[6 + n], abs=1e-15)


def test_generalized_matches_quadrature():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(-15, 16))
        x1, x2, phi = rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(-math.pi, 3 * math.pi)
        assert abs(generalized_bessel_2d(n, x1, x2, phi) - quadrature(n, x1, x2, phi)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(-10, 10), st.floats(0, 8))
def test_generalized_reduces_to_bessel(n, x):
    assert generalized_bessel_2d(n, x, 0.0, 1.234) == pytest.approx(jv(n, x), abs=1e-14)


def test_generalized_second_tone_only():
    # only even harmonics: G_{2k} = J_k(x2) exp(-i k phi)
    x2, phi = 1.7, 0.4
    for k in range(-4, 5):
        assert generalized_bessel_2d(2 * k, 0.0, x2, phi) == pytest.approx(jv(k, x2) * np.exp(-1j * k * phi))
        assert abs(generalized_bessel_2d(2 * k + 1, 0.0, x2, phi)) < 1e-15


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 6), st.floats(0, 6), st.floats(0, 2 * math.pi), st.integers(-8, 8))
def test_phase_relations(x1, x2, phi, n):
    g = generalized_bessel_2d(n, x1, x2, phi)
    assert g == pytest.approx(np.conj(generalized_bessel_2d(n, x1, x2, -phi)), abs=1e-13)
    assert generalized_bessel_2d(-n, x1, x2, -phi) == pytest.approx((-1) ** n * generalized_bessel_2d(n, x1, x2, phi + math.pi), abs=1e-13)
    assert generalized_bessel_2d(n, x1, x2, phi + 2 * math.pi) == pytest.approx(g, abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 6), st.floats(0, 6), st.floats(0, 2 * math.pi))
def test_ladder_is_unitary_and_consistent(x1, x2, phi):
    n_max = 40
    g = generalized_bessel_ladder(x1, x2, phi, n_max)
    assert np.sum(np.abs(g) ** 2) == pytest.approx(1.0, abs=1e-12)
    for n in (-3, 0, 5):
        assert g[n + n_max] == pytest.approx(generalized_bessel_2d(n, x1, x2, phi), abs=1e-14)
