"""Curve fitting with a scikit-learn style estimator interface.

Every estimator follows ``fit(x, y) -> self`` / ``predict(x)`` and exposes
its results as trailing-underscore attributes. The optimiser is MINPACK's
Levenberg-Marquardt (``scipy.optimize.least_squares(method="lm")``), which
uses a forward-difference Jacobian.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_consistent_length, check_is_fitted, column_or_1d

MAX_ITER = 200


class FitError(RuntimeError):
    """Optimiser failure; ``best`` holds the best parameters seen."""

    def __init__(self, message, best=None, cost=None):
        super().__init__(message)
        self.best = best
        self.cost = cost


def _validate(x, y, sample_weight=None, min_points=4):
    x = column_or_1d(np.asarray(x, dtype=float), warn=True)
    y = column_or_1d(np.asarray(y, dtype=float), warn=True)
    check_consistent_length(x, y)
    if x.size < min_points:
        raise ValueError(f"need at least {min_points} points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("input contains NaN or inf")
    if sample_weight is None:
        w = np.ones_like(y)
    else:
        w = column_or_1d(np.asarray(sample_weight, dtype=float))
        check_consistent_length(y, w)
        if np.any(w < 0):
            raise ValueError("sample weights must be non-negative")
    return x, y, np.sqrt(w)


def _solve(residual, p0, n_params, max_iter=MAX_ITER, x_scale=1.0):
    res = least_squares(
        residual, np.asarray(p0, float), method="lm", max_nfev=max_iter * (n_params + 1),
        x_scale=x_scale, xtol=1e-12, ftol=1e-12, gtol=1e-12,
    )
    if res.status == 0 or not np.all(np.isfinite(res.x)):
        raise FitError(
            f"least squares did not converge within {max_iter} iterations: {res.message}",
            best=res.x, cost=float(res.cost),
        )
    return res


def noise_floor(y):
    """Robust white-noise estimate from second differences (MAD based)."""
    y = np.asarray(y, dtype=float)
    if y.size < 5:
        return 0.0
    d2 = np.diff(y, 2)
    mad = np.median(np.abs(d2 - np.median(d2)))
    return float(1.4826 * mad / math.sqrt(6.0))


def lorentzian(x, center, fwhm, amplitude, offset):
    """Peak height ``amplitude`` above ``offset``, full width ``fwhm``."""
    hw2 = (0.5 * fwhm) ** 2
    return amplitude * hw2 / ((x - center) ** 2 + hw2) + offset


class LorentzianFit(RegressorMixin, BaseEstimator):
    """Single Lorentzian line with a constant baseline.

    Parameters
    ----------
    noise : float, optional
        Known per-point noise level. When omitted, it is estimated from the
        data with :func:`noise_floor`.
    multi_peak_factor : float
        The fit is flagged (``multi_peak_ = True``) when the residual RMS
        exceeds this multiple of the noise level.

    Attributes
    ----------
    center_, fwhm_, amplitude_, offset_ : float
        In the units of ``x``.
    residual_rms_, noise_ : float
    multi_peak_ : bool
    """

    def __init__(self, noise=None, multi_peak_factor=5.0):
        self.noise = noise
        self.multi_peak_factor = multi_peak_factor

    def _initial(self, x, y):
        offset = float(np.min(y))
        k = int(np.argmax(y))
        amp = float(y[k] - offset)
        above = x[y - offset >= 0.5 * amp]
        fwhm = float(above.max() - above.min()) if above.size > 1 else float(np.ptp(x)) / 10
        fwhm = max(fwhm, float(np.min(np.diff(np.sort(x)))))
        return np.array([x[k], fwhm, amp, offset])

    def fit(self, x, y, sample_weight=None):
        x, y, sw = _validate(x, y, sample_weight)
        p0 = self._initial(x, y)
        scale = np.array([p0[1], p0[1], max(abs(p0[2]), 1e-300), max(abs(p0[2]), 1e-300)])

        def resid(p):
            return sw * (lorentzian(x, *p) - y)

        res = _solve(resid, p0, 4, x_scale=scale)
        self.center_, fwhm, self.amplitude_, self.offset_ = (float(v) for v in res.x)
        self.fwhm_ = abs(fwhm)
        r = y - lorentzian(x, *res.x)
        self.residual_rms_ = float(np.sqrt(np.mean(r**2)))
        self.noise_ = float(self.noise) if self.noise is not None else noise_floor(y)
        floor = max(self.noise_, 1e-12 * float(np.max(np.abs(y))))
        self.multi_peak_ = bool(self.residual_rms_ > self.multi_peak_factor * floor)
        if self.multi_peak_:
            warnings.warn(
                f"Lorentzian residual {self.residual_rms_:.3g} exceeds "
                f"{self.multi_peak_factor}x the noise floor {floor:.3g}; line may contain several peaks",
                RuntimeWarning, stacklevel=2,
            )
        return self

    def predict(self, x):
        check_is_fitted(self, "fwhm_")
        x = column_or_1d(np.asarray(x, dtype=float))
        return lorentzian(x, self.center_, self.fwhm_, self.amplitude_, self.offset_)


ENVELOPE_EXPONENTS = {"gaussian": 2.0, "exponential": 1.0, "stretched": None}


def envelope_model(tau, amplitude, decay, exponent, omega, phase, offset):
    return amplitude * np.exp(-((tau / decay) ** exponent)) * np.cos(omega * tau + phase) + offset


class EnvelopeFit(RegressorMixin, BaseEstimator):
    """Decaying fringe ``A exp(-(tau/T)^p) cos(w tau + phi) + c``.

    Parameters
    ----------
    model : {'gaussian', 'exponential', 'stretched'}
        Fixes ``p`` to 2 or 1, or fits it.
    oscillating : bool
        With ``False`` the cosine factor is dropped (``w = phi = 0``).
    """

    def __init__(self, model="gaussian", oscillating=True, max_iter=MAX_ITER):
        self.model = model
        self.oscillating = oscillating
        self.max_iter = max_iter

    def _unpack(self, q):
        it = iter(q)
        amp = next(it)
        decay = math.exp(next(it))
        p = ENVELOPE_EXPONENTS[self.model]
        if p is None:
            p = next(it)
        if self.oscillating:
            omega, phase = next(it), next(it)
        else:
            omega, phase = 0.0, 0.0
        offset = next(it)
        return amp, decay, p, omega, phase, offset

    def _initial(self, x, y):
        offset = float(np.mean(y[-max(2, y.size // 10):]))
        amp = float(y[0] - offset)
        if self.oscillating:
            # dominant frequency from a zero-padded FFT
            n = 16 * x.size
            dt = float(np.mean(np.diff(x)))
            spec = np.abs(np.fft.rfft(y - np.mean(y), n))
            freqs = 2 * np.pi * np.fft.rfftfreq(n, dt)
            omega = float(freqs[int(np.argmax(spec[1:])) + 1])
            amp = float(np.max(np.abs(y - offset)))
            phase = 0.0 if y[0] >= offset else math.pi
        env = np.abs(y - offset)
        target = abs(amp) / math.e
        below = np.nonzero(env < target)[0]
        decay = float(x[below[0]]) if below.size and x[below[0]] > 0 else float(np.ptp(x)) / 2
        q = [abs(amp), math.log(max(decay, 1e-12))]
        if ENVELOPE_EXPONENTS[self.model] is None:
            q.append(2.0)
        if self.oscillating:
            q += [omega, phase]
        q.append(offset)
        return np.array(q)

    def fit(self, x, y, sample_weight=None):
        if self.model not in ENVELOPE_EXPONENTS:
            raise ValueError(f"unknown envelope model {self.model!r}")
        x, y, sw = _validate(x, y, sample_weight, min_points=8)
        q0 = self._initial(x, y)

        def resid(q):
            return sw * (envelope_model(x, *self._unpack(q)) - y)

        res = _solve(resid, q0, q0.size, self.max_iter)
        amp, decay, p, omega, phase, offset = self._unpack(res.x)
        if amp < 0:
            amp, phase = -amp, phase + math.pi
        self.amplitude_, self.decay_, self.exponent_ = amp, decay, p
        self.omega_, self.phase_, self.offset_ = omega, phase, offset
        r = y - envelope_model(x, amp, decay, p, omega, phase, offset)
        self.residual_ = float(np.sqrt(np.mean(r**2)))
        return self

    def predict(self, x):
        check_is_fitted(self, "decay_")
        x = column_or_1d(np.asarray(x, dtype=float))
        return envelope_model(
            x, self.amplitude_, self.decay_, self.exponent_, self.omega_, self.phase_, self.offset_
        )


class BlochFit(RegressorMixin, BaseEstimator):
    """Fit ``(T1, T2*, Gamma)`` of the optical model to an emission trace.

    The forward model is a callable ``forward(t1, t2_star, gamma) -> trace``
    evaluated on the fitted time grid. Amplitude and offset enter linearly
    and are eliminated at every step (variable projection). Internally
    ``T1 = exp(a)``, ``1/T2* = b^2`` and ``Gamma = c^2``, so the lifetime
    limit ``T2* = inf`` and ``Gamma = 0`` are interior points.

    Parameters
    ----------
    forward : callable
    t1_guess : float, optional
        Starting ``T1``; estimated from the trace tail when omitted.
    tail_start : float, optional
        Time after which the optical drive is off (for the ``T1`` guess).
    n_starts : int
        Deterministic jittered starts; the lowest cost wins.
    """

    def __init__(self, forward=None, t1_guess=None, tail_start=None, n_starts=3, max_iter=MAX_ITER):
        self.forward = forward
        self.t1_guess = t1_guess
        self.tail_start = tail_start
        self.n_starts = n_starts
        self.max_iter = max_iter

    @staticmethod
    def _physical(q):
        return math.exp(q[0]), (math.inf if q[1] == 0 else 1.0 / q[1] ** 2), q[2] ** 2

    def _linear(self, f, y, sw):
        a = np.column_stack([f, np.ones_like(f)]) * sw[:, None]
        coef, *_ = np.linalg.lstsq(a, y * sw, rcond=None)
        return coef

    def _guess_t1(self, x, y):
        if self.t1_guess is not None:
            return float(self.t1_guess)
        start = self.tail_start if self.tail_start is not None else x[int(np.argmax(y))]
        sel = (x > start) & (y > 0.05 * np.max(y))
        if np.count_nonzero(sel) >= 3:
            slope = np.polyfit(x[sel], np.log(y[sel]), 1)[0]
            if slope < 0:
                return -1.0 / slope
        return float(np.ptp(x)) / 10

    def fit(self, x, y, sample_weight=None):
        if self.forward is None:
            raise ValueError("BlochFit needs a forward model")
        x, y, sw = _validate(x, y, sample_weight, min_points=8)
        t1 = self._guess_t1(x, y)
        span = float(np.ptp(x))

        def resid(q):
            f = np.asarray(self.forward(*self._physical(q)), dtype=float)
            coef = self._linear(f, y, sw)
            return sw * (coef[0] * f + coef[1] - y)

        jitter = [(1.0, 0.3, 0.3), (0.7, 0.6, 0.1), (1.4, 0.1, 0.6)]
        best, failure = None, None
        for k in range(self.n_starts):
            jt, jb, jc = jitter[k % len(jitter)]
            q0 = np.array([math.log(t1 * jt), jb / math.sqrt(t1), jc * math.sqrt(1.0 / span)])
            try:
                res = _solve(resid, q0, 3, self.max_iter)
            except FitError as err:
                failure = err
                continue
            if best is None or res.cost < best.cost:
                best = res
        if best is None:
            raise FitError(f"all {self.n_starts} starts failed: {failure}", failure.best, failure.cost)
        self.t1_, self.t2_star_, self.gamma_ = self._physical(best.x)
        self.t2_ = 1.0 / (0.5 / self.t1_ + (0.0 if math.isinf(self.t2_star_) else 1.0 / self.t2_star_))
        f = np.asarray(self.forward(self.t1_, self.t2_star_, self.gamma_), dtype=float)
        self.amplitude_, self.offset_ = (float(v) for v in self._linear(f, y, sw))
        self.cost_ = float(best.cost)
        self.x_ = x
        return self

    def predict(self, x=None):
        check_is_fitted(self, "t1_")
        if x is not None:
            x = column_or_1d(np.asarray(x, dtype=float))
            if x.shape != self.x_.shape or not np.array_equal(x, self.x_):
                raise ValueError("BlochFit predicts on the fitted time grid only")
        f = np.asarray(self.forward(self.t1_, self.t2_star_, self.gamma_), dtype=float)
        return self.amplitude_ * f + self.offset_
