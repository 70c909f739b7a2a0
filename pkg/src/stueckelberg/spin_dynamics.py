"""Ground-state spin sequences: Rabi, Ramsey and Hahn echo with classical noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from .fitting import EnvelopeFit
from .lindblad import LindbladModel, evolve
from .quantum import unitary_propagator
from .spin import zefoz_basis

NOISE_KINDS = ("none", "quasi_static_gaussian", "ornstein_uhlenbeck")
TRANSITIONS = ("zero_plus", "plus_minus")
SHOT_CHUNK = 512


@dataclass(frozen=True)
class NoiseModel:
    """Classical detuning noise (rad/us) standing in for the nuclear bath."""

    kind: str = "none"
    sigma: float = 0.0
    tau_c: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.kind == "ornstein_uhlenbeck" and not (self.tau_c is not None and self.tau_c > 0):
            raise ValueError("Ornstein-Uhlenbeck noise needs tau_c > 0")


@dataclass
class SpinSequenceResult:
    x: np.ndarray
    signal: np.ndarray
    n_samples: int
    stderr: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)


def shot_rng(seed, stream, shot):
    """Independent generator for one Monte Carlo shot."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(shot)]))


def _ou_filter(xi, sigma, a):
    """Exact OU recursion along the last axis; ``xi[..., 0]`` seeds the stationary start."""
    drive = sigma * math.sqrt(1.0 - a * a) * xi
    drive[..., 0] = sigma * xi[..., 0]
    return lfilter([1.0], [1.0, -a], drive, axis=-1)


def sample_noise(model: NoiseModel, times, shot=0, stream=0):
    """One noise realisation on ``times`` (uniform grid for OU)."""
    return sample_noise_batch(model, times, shot, 1, stream)[0]


def sample_noise_batch(model: NoiseModel, times, first_shot, n_shots, stream=0):
    times = np.asarray(times, dtype=float)
    out = np.zeros((n_shots, times.size))
    if model.kind == "none" or model.sigma == 0:
        return out
    xi = np.empty((n_shots, times.size if model.kind == "ornstein_uhlenbeck" else 1))
    for k in range(n_shots):
        xi[k] = shot_rng(model.seed, stream, first_shot + k).standard_normal(xi.shape[1])
    if model.kind == "quasi_static_gaussian":
        out[:] = model.sigma * xi
        return out
    steps = np.diff(times)
    if steps.size and np.ptp(steps) > 1e-9 * steps.max():
        raise ValueError("OU sampling needs a uniform time grid")
    a = math.exp(-(steps[0] if steps.size else 0.0) / model.tau_c)
    return _ou_filter(xi, model.sigma, a)


def readout_signal(population, bright=1.0, dark=0.0):
    """PL signal ``dark + (bright - dark) * population``; the defaults return the population."""
    return dark + (bright - dark) * np.asarray(population, dtype=float)


# --------------------------------------------------------------------------
# calibration helpers


def quasi_static_sigma(t2_star):
    """``sigma`` whose Ramsey envelope is ``exp(-(tau/T2*)^2)``."""
    return math.sqrt(2.0) / t2_star


def ou_echo_decay(tau, sigma, tau_c):
    """Echo decay exponent ``chi`` for OU noise: coherence is ``exp(-chi)``."""
    x = np.asarray(tau, dtype=float) / tau_c
    return sigma**2 * tau_c**2 * (x - 3.0 + 4.0 * np.exp(-0.5 * x) - np.exp(-x))


def calibrate_ou_sigma(t_echo, tau_c):
    """``sigma`` with ``chi(t_echo) = 1`` for correlation time ``tau_c``."""
    unit = float(ou_echo_decay(t_echo, 1.0, tau_c))
    return 1.0 / math.sqrt(unit)


def calibrate_ou_fit(t_echo, tau_c, tau_grid):
    """``sigma`` such that a stretched-exponential fit of the exact OU echo
    crosses ``1/e`` at ``t_echo`` on ``tau_grid``."""
    tau_grid = np.asarray(tau_grid, dtype=float)

    def mismatch(log_sigma):
        y = 0.5 * (1.0 + np.exp(-ou_echo_decay(tau_grid, math.exp(log_sigma), tau_c)))
        return EnvelopeFit("stretched", oscillating=False).fit(tau_grid, y).decay_ - t_echo

    s0 = math.log(calibrate_ou_sigma(t_echo, tau_c))
    return math.exp(brentq(mismatch, s0 - 0.3, s0 + 0.3, xtol=1e-12))


# --------------------------------------------------------------------------
# sequences


def _integration_grid(tau_max, model: NoiseModel, resolution):
    """Uniform grid for the OU phase integral."""
    h = min(model.tau_c / 50.0, tau_max / 2000.0) / resolution
    n = max(2, math.ceil(tau_max / h))
    return np.linspace(0.0, tau_max, n + 1)


def _phase_integrals(model, tau, shots, stream, resolution, echo):
    """Accumulated noise phase per shot and per ``tau`` (shape ``(n, len(tau))``)."""
    tau = np.asarray(tau, dtype=float)
    if model.kind == "none" or model.sigma == 0:
        return np.zeros((shots[1] - shots[0], tau.size))
    if model.kind == "quasi_static_gaussian":
        eps = sample_noise_batch(model, [0.0], shots[0], shots[1] - shots[0], stream)
        if echo:
            return np.zeros((eps.shape[0], tau.size))
        return eps[:, :1] * tau[None, :]
    grid = _integration_grid(float(tau.max()), model, resolution)
    eps = sample_noise_batch(model, grid, shots[0], shots[1] - shots[0], stream)
    h = grid[1] - grid[0]
    cum = np.concatenate(
        [np.zeros((eps.shape[0], 1)), np.cumsum(0.5 * h * (eps[:, 1:] + eps[:, :-1]), axis=1)], axis=1
    )

    def at(t):
        pos = t / h
        i = np.minimum(np.floor(pos).astype(int), grid.size - 2)
        f = pos - i
        return cum[:, i] * (1 - f) + cum[:, i + 1] * f

    if echo:
        return 2.0 * at(0.5 * tau) - at(tau)
    return at(tau)


def _average(model, tau, n_samples, stream, detuning, echo, resolution):
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("free-evolution times must be >= 0")
    s1 = np.zeros(tau.size)
    s2 = np.zeros(tau.size)
    for lo in range(0, n_samples, SHOT_CHUNK):
        hi = min(n_samples, lo + SHOT_CHUNK)
        phase = _phase_integrals(model, tau, (lo, hi), stream, resolution, echo)
        c = 0.5 * (1.0 + np.cos(detuning * tau[None, :] + phase))
        s1 += c.sum(axis=0)
        s2 += (c * c).sum(axis=0)
    mean = s1 / n_samples
    if n_samples > 1:
        var = np.maximum(s2 - n_samples * mean**2, 0.0) / (n_samples - 1)
        stderr = np.sqrt(var / n_samples)
    else:
        stderr = np.zeros(tau.size)
    return mean, stderr


def ramsey(tau, detuning, noise: NoiseModel, n_samples, resolution=1):
    """Ramsey fringe ``(1 + <cos(detuning tau + phi_noise)>)/2``.

    ``resolution`` refines the OU integration grid (oracle runs use 10).
    """
    mean, err = _average(noise, tau, n_samples, 0, detuning, False, resolution)
    return SpinSequenceResult(np.asarray(tau, float), mean, int(n_samples), err, "ramsey")


def hahn_echo(tau, noise: NoiseModel, n_samples, detuning=0.0, resolution=1):
    """Hahn echo with ideal pulses; the phase changes sign at ``tau/2``."""
    mean, err = _average(noise, tau, n_samples, 1, 0.0, True, resolution)
    return SpinSequenceResult(np.asarray(tau, float), mean, int(n_samples), err, "echo")


def fit_envelope(result: SpinSequenceResult, model="gaussian", oscillating=None):
    """Fit a decay envelope to a sequence result.

    Returns ``(T, p, residual)`` with the fitted estimator in a fourth slot.
    Echo results are fitted without the cosine factor unless told otherwise.
    """
    if oscillating is None:
        oscillating = result.label != "echo"
    if result.x.size < 8:
        raise ValueError("need at least 8 points")
    est = EnvelopeFit(model=model, oscillating=oscillating).fit(result.x, result.signal)
    return est.decay_, est.exponent_, est.residual_, est


# --------------------------------------------------------------------------
# spin Rabi


def _pair(transition):
    if transition == "zero_plus":
        return "0", "+", "sx"
    if transition == "plus_minus":
        return "+", "-", "sz"
    raise ValueError(f"unknown transition {transition!r}; expected one of {TRANSITIONS}")


def spin_rabi(
    transition,
    rabi_mw,
    durations,
    full3level=False,
    d_mhz=1333.9535,
    e_mhz=18.4195,
    leakage=0.0,
    dt=None,
):
    """Resonant spin Rabi oscillation on one transition of the ZEFOZ triplet.

    The drive couples the pair through the matching rotated spin matrix
    (``S'_x`` for ``0<->+``, ``S'_z`` for ``+<->-``). ``plus_minus`` starts
    from ``|+>`` after an ideal pi pulse. With ``full3level`` the spectator
    level is kept at its real detuning and coupled with relative strength
    ``leakage``, and the state is integrated with RK4.

    Returns the target-state population.
    """
    a, b, op_name = _pair(transition)
    zb = zefoz_basis(d_mhz, e_mhz)
    ia, ib = zb.index[a], zb.index[b]
    spectator = ({"0", "+", "-"} - {a, b}).pop()
    isp = zb.index[spectator]
    op = getattr(zb, op_name)
    durations = np.asarray(durations, dtype=float)
    if np.any(durations < 0):
        raise ValueError("durations must be >= 0")

    h = np.zeros((3, 3), complex)
    h[ia, ib] = 0.5 * rabi_mw * op[ia, ib]
    h[ib, ia] = np.conj(h[ia, ib])
    psi0 = np.zeros(3, complex)
    psi0[ia] = 1.0

    if not full3level:
        pops = np.empty(durations.size)
        for k, t in enumerate(durations):
            psi = unitary_propagator(h, t) @ psi0
            pops[k] = abs(psi[ib]) ** 2
        return SpinSequenceResult(durations, pops, 1, np.zeros(durations.size), "spin_rabi")

    # spectator detuning in the frame rotating with the driven transition
    energy = dict(zip(zb.labels, zb.energies))
    w_drive = abs(energy[b] - energy[a])
    partner = a  # the spectator couples to the initial level in both cases
    w_spec = abs(energy[spectator] - energy[partner])
    h[isp, isp] = 2 * math.pi * (w_spec - w_drive)
    h[isp, zb.index[partner]] = h[zb.index[partner], isp] = 0.5 * rabi_mw * leakage
    model = LindbladModel(3, h0=h)
    times = np.unique(np.concatenate([[0.0], durations]))
    step = dt if dt is not None else min(0.01 / max(rabi_mw, 1e-12), 0.05 / np.linalg.norm(h, 2))
    traj = evolve(np.outer(psi0, psi0.conj()), model, times, step)
    pops = np.interp(durations, times, traj.population(ib))
    return SpinSequenceResult(durations, pops, 1, np.zeros(durations.size), "spin_rabi")
