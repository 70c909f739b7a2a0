"""Bessel functions of the first kind and their two-tone generalisation."""

from __future__ import annotations

import math

import numpy as np

_SERIES_LIMIT = 2.0
_RESCALE = 1e250


def _series(n, x):
    """Power series for ``J_n(x)``, ``n >= 0``; accurate for ``|x| < 2``."""
    half = 0.5 * x
    term = 1.0
    for k in range(1, n + 1):
        term *= half / k
    total = term
    q = -half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if abs(term) <= 1e-17 * abs(total) or term == 0.0:
            break
    return total


def _miller_ladder(x, n_max):
    """``J_0 .. J_{n_max}`` at ``x > 0`` by downward recurrence.

    Normalised with ``J_0 + 2 sum J_{2k} = 1``.
    """
    start = n_max + int(math.sqrt(40.0 * max(n_max, x))) + int(x) + 20
    start += start % 2
    out = np.zeros(n_max + 1)
    j_next, j_cur = 0.0, 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds J_{k-1}
        if k - 1 <= n_max:
            out[k - 1] = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        if abs(j_cur) > _RESCALE:
            j_cur /= _RESCALE
            j_next /= _RESCALE
            out /= _RESCALE
            norm /= _RESCALE
    norm += j_cur
    return out / norm


def bessel_ladder(x, n_max):
    """Return ``J_n(x)`` for ``n = 0 .. n_max`` as an array.

    Uses the power series when ``|x| < 2`` and downward Miller recurrence
    otherwise; negative ``x`` follows from ``J_n(-x) = (-1)^n J_n(x)``.
    """
    x = float(x)
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if x == 0.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    ax = abs(x)
    if ax < _SERIES_LIMIT:
        out = np.array([_series(n, ax) for n in range(n_max + 1)])
    else:
        out = _miller_ladder(ax, n_max)
    if x < 0:
        out[1::2] *= -1.0
    return out


def bessel_jn(n, x):
    """Bessel function of the first kind ``J_n(x)`` for integer ``n``.

    ``x`` may be a scalar or an array. ``J_{-n}(x) = (-1)^n J_n(x)``.
    """
    n = int(n)
    m = abs(n)
    sign = -1.0 if (n < 0 and m % 2) else 1.0
    if np.ndim(x) == 0:
        return sign * float(bessel_ladder(x, m)[m])
    xs = np.asarray(x, dtype=float)
    flat = np.array([bessel_ladder(v, m)[m] for v in xs.ravel()])
    return sign * flat.reshape(xs.shape)


def bessel_sideband_ladder(x, n_max):
    """``J_n(x)`` for ``n = -n_max .. n_max`` (length ``2 n_max + 1``)."""
    pos = bessel_ladder(x, n_max)
    neg = pos[:0:-1].copy()
    neg[(np.arange(n_max, 0, -1) % 2) == 1] *= -1.0
    return np.concatenate([neg, pos])


def _order_cutoff(x, tol=1e-15):
    """Smallest K with ``|J_k(x)| < tol`` for every ``|k| > K``."""
    ax = abs(float(x))
    k_max = int(ax) + 60
    ladder = np.abs(bessel_ladder(ax, k_max))
    big = np.nonzero(ladder >= tol)[0]
    return int(big[-1]) if big.size else 0


def generalized_bessel_2d(n, x1, x2, phi):
    """Two-tone generalised Bessel function for an octave drive pair.

    ``sum_k J_{n-2k}(x1) J_k(x2) exp(-i k phi)``, i.e. the ``n``-th Fourier
    coefficient ``(1/2 pi) int exp(-i[x1 sin t + x2 sin(2t + phi)]) exp(i n t) dt``.
    The sum over ``k`` stops once ``|J_k(x2)| < 1e-15``.
    """
    n = int(n)
    k_cut = _order_cutoff(x2)
    ks = np.arange(-k_cut, k_cut + 1)
    j2 = bessel_sideband_ladder(x2, k_cut)
    orders = n - 2 * ks
    span = int(np.max(np.abs(orders)))
    j1 = bessel_sideband_ladder(x1, span)
    return complex(np.sum(j1[orders + span] * j2 * np.exp(-1j * ks * phi)))


def generalized_bessel_ladder(x1, x2, phi, n_max):
    """Vector of :func:`generalized_bessel_2d` for ``n = -n_max .. n_max``."""
    k_cut = _order_cutoff(x2)
    ks = np.arange(-k_cut, k_cut + 1)
    j2 = bessel_sideband_ladder(x2, k_cut) * np.exp(-1j * ks * phi)
    ns = np.arange(-n_max, n_max + 1)
    span = n_max + 2 * k_cut
    j1 = bessel_sideband_ladder(x1, span)
    orders = ns[:, None] - 2 * ks[None, :]
    return np.sum(j1[orders + span] * j2[None, :], axis=1)
