"""Periodically driven optical model: one-period propagators and spectra.

The longitudinal drive ``(detuning + s(t)) |e><e|`` is removed exactly by the
frame ``R(t) = exp(-i Phi(t) |e><e|)`` with ``Phi(t) = int_0^t (detuning + s)``.
In that frame the generator is ``L_D + cos(Phi) L_X + sin(Phi) L_Y`` where
``L_D`` is the dissipator (invariant under ``R``) and ``L_X``, ``L_Y`` come
from the two quadratures of the optical coupling. Populations are the same in
both frames, so emission integrals need no back-transformation. After one
drive period the state is returned to the laser frame by ``R(detuning * T)``.

The RK4 integration over a period runs in a compiled kernel, one grid point
at a time, and can be spread over threads without changing any result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import expm

from .lindblad import (
    E,
    G,
    OpticalBlochParams,
    bloch_collapse_operators,
    commutator_superoperator,
    coupled_subspace,
    dissipator_superoperator,
    real_superoperator,
    to_real,
    trace_row,
)

DEFAULT_THETA = 0.15
MIN_STEPS = 40


class TrappingError(ValueError):
    """Continuous-wave emission requested for a model with an absorbing trap."""


@dataclass(frozen=True)
class FrameGenerators:
    """Reduced real generators of the co-moving frame."""

    ld: np.ndarray
    lx: np.ndarray
    ly: np.ndarray
    lz: np.ndarray
    lz2: np.ndarray
    index: np.ndarray
    excited: int
    trace: np.ndarray
    ground: np.ndarray
    rate_scale: float

    @property
    def dim(self):
        return self.ld.shape[0]

    def rotation(self, phi):
        """Laser-frame superoperator of ``rho -> R rho R^dag``, ``R = exp(-i phi |e><e|)``.

        ``-i[|e><e|, .]`` has spectrum ``{0, +-i}``, so the exponential is
        ``1 + sin(phi) Z + (1 - cos(phi)) Z^2``.
        """
        phi = np.asarray(phi, dtype=float)[..., None, None]
        eye = np.eye(self.dim)
        return eye + np.sin(phi) * self.lz + (1.0 - np.cos(phi)) * self.lz2

    def static(self, detuning):
        """Laser-frame generator without ac drive."""
        return self.ld + self.lx + detuning * self.lz


def frame_generators(p: OpticalBlochParams) -> FrameGenerators:
    d = 3
    ops = bloch_collapse_operators(p.t1, p.t2_star, p.gamma, p.repump, p.convention)
    ld = sum(real_superoperator(dissipator_superoperator(c.matrix), d) for c in ops)
    hx = np.zeros((d, d), complex)
    hx[G, E] = hx[E, G] = 0.5 * p.rabi
    hy = np.zeros((d, d), complex)
    hy[G, E] = -0.5j * p.rabi
    hy[E, G] = 0.5j * p.rabi
    pe = np.zeros((d, d), complex)
    pe[E, E] = 1.0
    lx = real_superoperator(commutator_superoperator(hx), d)
    ly = real_superoperator(commutator_superoperator(hy), d)
    lz = real_superoperator(commutator_superoperator(pe), d)
    rho_g = np.zeros((d, d))
    rho_g[G, G] = 1.0
    x0 = to_real(rho_g)
    # lz shares the coherence coordinates of lx, so it never widens the set
    idx = coupled_subspace([ld, lx, ly], x0)
    sub = np.ix_(idx, idx)
    rates = sum(c.rate for c in ops)
    lz_r = lz[sub]
    return FrameGenerators(
        ld=ld[sub].copy(),
        lx=lx[sub].copy(),
        ly=ly[sub].copy(),
        lz=lz_r.copy(),
        lz2=lz_r @ lz_r,
        index=idx,
        excited=int(np.nonzero(idx == E)[0][0]),
        trace=trace_row(d, idx),
        ground=x0[idx],
        rate_scale=float(rates + p.rabi),
    )


@njit(cache=True, nogil=True)
def _phase(t, delta, xs, ws, phs, offs):
    u = delta * t
    for j in range(xs.shape[0]):
        u += xs[j] * (math.sin(ws[j] * t + phs[j]) - offs[j])
    return u


@njit(cache=True, nogil=True)
def _apply(ld, lx, ly, c, s, y, out):
    d = ld.shape[0]
    m = y.shape[1]
    for i in range(d):
        for k in range(m):
            acc = 0.0
            for j in range(d):
                acc += (ld[i, j] + c * lx[i, j] + s * ly[i, j]) * y[j, k]
            out[i, k] = acc


@njit(cache=True, nogil=True)
def _period_kernel(deltas, nsteps, period, xs, ws, phs, ld, lx, ly, excited, props, rows):
    """Fill ``props[p]`` with the frame propagator over one period and
    ``rows[p]`` with the row mapping a start state to ``int rho_ee dt``."""
    d = ld.shape[0]
    offs = np.empty(xs.shape[0])
    for j in range(xs.shape[0]):
        offs[j] = math.sin(phs[j])
    y = np.empty((d, d))
    tmp = np.empty((d, d))
    k1 = np.empty((d, d))
    k2 = np.empty((d, d))
    k3 = np.empty((d, d))
    k4 = np.empty((d, d))
    q = np.empty(d)
    for p in range(deltas.shape[0]):
        delta = deltas[p]
        n = nsteps[p]
        h = period / n
        for i in range(d):
            q[i] = 0.0
            for k in range(d):
                y[i, k] = 1.0 if i == k else 0.0
        phi0 = _phase(0.0, delta, xs, ws, phs, offs)
        c0 = math.cos(phi0)
        s0 = math.sin(phi0)
        for step in range(n):
            t = step * h
            phim = _phase(t + 0.5 * h, delta, xs, ws, phs, offs)
            phi1 = _phase(t + h, delta, xs, ws, phs, offs)
            cm = math.cos(phim)
            sm = math.sin(phim)
            c1 = math.cos(phi1)
            s1 = math.sin(phi1)
            _apply(ld, lx, ly, c0, s0, y, k1)
            for i in range(d):
                for k in range(d):
                    tmp[i, k] = y[i, k] + 0.5 * h * k1[i, k]
            _apply(ld, lx, ly, cm, sm, tmp, k2)
            for k in range(d):
                q[k] += (h / 6.0) * (y[excited, k] + 2.0 * tmp[excited, k])
            for i in range(d):
                for k in range(d):
                    tmp[i, k] = y[i, k] + 0.5 * h * k2[i, k]
            _apply(ld, lx, ly, cm, sm, tmp, k3)
            for k in range(d):
                q[k] += (h / 6.0) * 2.0 * tmp[excited, k]
            for i in range(d):
                for k in range(d):
                    tmp[i, k] = y[i, k] + h * k3[i, k]
            _apply(ld, lx, ly, c1, s1, tmp, k4)
            for k in range(d):
                q[k] += (h / 6.0) * tmp[excited, k]
            for i in range(d):
                for k in range(d):
                    y[i, k] += (h / 6.0) * (k1[i, k] + 2.0 * k2[i, k] + 2.0 * k3[i, k] + k4[i, k])
            c0 = c1
            s0 = s1
        for i in range(d):
            rows[p, i] = q[i]
            for k in range(d):
                props[p, i, k] = y[i, k]


def step_counts(deltas, drive, gens: FrameGenerators, theta=DEFAULT_THETA, n_min=MIN_STEPS):
    """RK4 steps per drive period for each detuning.

    The frame phase advances by at most ``T (|delta| + sum A)`` per period;
    each step covers at most ``theta`` radians of it, and likewise of the
    optical and relaxation rates.
    """
    amp = sum(abs(t.amplitude) for t in drive.tones)
    rate = np.abs(np.asarray(deltas, dtype=float)) + amp + gens.rate_scale
    return np.maximum(n_min, np.ceil(drive.period * rate / theta)).astype(np.int64)


def _drive_arrays(drive):
    xs = np.array([t.ratio for t in drive.tones])
    ws = np.array([t.omega for t in drive.tones])
    phs = np.array([t.phase for t in drive.tones])
    return xs, ws, phs


def period_propagators(deltas, drive, gens: FrameGenerators, nsteps, threads=1):
    """Frame propagators ``P`` and emission rows ``q`` over one period.

    Points are split into contiguous chunks; the per-point step counts are
    fixed beforehand, so the output does not depend on ``threads``.
    """
    deltas = np.ascontiguousarray(deltas, dtype=float)
    nsteps = np.ascontiguousarray(nsteps, dtype=np.int64)
    npts = deltas.size
    d = gens.dim
    props = np.empty((npts, d, d))
    rows = np.empty((npts, d))
    xs, ws, phs = _drive_arrays(drive)
    args = (drive.period, xs, ws, phs, gens.ld, gens.lx, gens.ly, gens.excited)

    def work(lo, hi):
        _period_kernel(deltas[lo:hi], nsteps[lo:hi], *args, props[lo:hi], rows[lo:hi])

    threads = max(1, int(threads))
    if threads == 1 or npts < 2 * threads:
        work(0, npts)
    else:
        bounds = np.linspace(0, npts, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: work(*b), zip(bounds[:-1], bounds[1:])))
    return props, rows


def fixed_points(lab_props, trace):
    """Periodic steady states: ``P x = x`` with unit trace, for a stack of ``P``."""
    n, d, _ = lab_props.shape
    a = lab_props - np.eye(d)
    a[:, 0, :] = trace
    rhs = np.zeros((n, d, 1))
    rhs[:, 0, 0] = 1.0
    return np.linalg.solve(a, rhs)[..., 0]


@dataclass(frozen=True)
class DrivenEmission:
    """Emission per grid point together with diagnostics."""

    values: np.ndarray
    nsteps: np.ndarray
    states: np.ndarray


def driven_emission(
    deltas,
    drive,
    p: OpticalBlochParams,
    readout_window=None,
    threads=1,
    theta=DEFAULT_THETA,
    n_min=MIN_STEPS,
    step_factor=1,
):
    """Emission under an ac drive for each laser detuning.

    ``readout_window=None`` returns the cycle-averaged steady emission rate
    ``<rho_ee>/T1`` (1/us). A window (us) is rounded to a whole number of
    drive periods; the return value is then ``int rho_ee/T1 dt`` from
    ``|g><g|`` over that window. ``states`` holds the laser-frame state
    coordinates at the end of the last period.
    """
    gens = frame_generators(p)
    deltas = np.asarray(deltas, dtype=float)
    if readout_window is None and p.traps:
        raise TrappingError(
            "continuous-wave emission is zero for a trapping model without repump; "
            "use a readout window (pulsed path)"
        )
    nsteps = step_counts(deltas, drive, gens, theta, n_min) * int(step_factor)
    props, rows = period_propagators(deltas, drive, gens, nsteps, threads)
    lab = np.einsum("nij,njk->nik", gens.rotation(deltas * drive.period), props)
    if readout_window is None:
        x = fixed_points(lab, gens.trace)
        values = np.einsum("nk,nk->n", rows, x) / (drive.period * p.t1)
        return DrivenEmission(values, nsteps, x)
    m = int(round(readout_window / drive.period))
    if m < 1:
        raise ValueError("readout window shorter than one drive period")
    x = np.broadcast_to(gens.ground, (deltas.size, gens.dim)).copy()
    total = np.zeros(deltas.size)
    for _ in range(m):
        total += np.einsum("nk,nk->n", rows, x)
        x = np.einsum("nij,nj->ni", lab, x)
    return DrivenEmission(total / p.t1, nsteps, x)


def static_emission(deltas, p: OpticalBlochParams, readout_window=None):
    """Emission without ac drive: steady rate, or window integral from ``|g><g|``."""
    gens = frame_generators(p)
    deltas = np.asarray(deltas, dtype=float)
    d = gens.dim
    out = np.empty(deltas.size)
    states = np.empty((deltas.size, d))
    if readout_window is None and p.traps:
        raise TrappingError(
            "continuous-wave emission is zero for a trapping model without repump; "
            "use a readout window (pulsed path)"
        )
    for k, delta in enumerate(deltas):
        g = gens.static(delta)
        if readout_window is None:
            a = g.copy()
            a[0, :] = gens.trace
            rhs = np.zeros(d)
            rhs[0] = 1.0
            x = np.linalg.solve(a, rhs)
            out[k] = x[gens.excited] / p.t1
        else:
            # augmented exponential integrates rho_ee alongside the state
            aug = np.zeros((d + 1, d + 1))
            aug[:d, :d] = g
            aug[d, gens.excited] = 1.0
            big = expm(aug * readout_window)
            x = big[:d, :d] @ gens.ground
            out[k] = (big[d, :d] @ gens.ground) / p.t1
        states[k] = x
    return DrivenEmission(out, np.zeros(deltas.size, np.int64), states)


def coordinates_to_states(x, gens: FrameGenerators):
    """Reduced real coordinates -> stack of 3x3 density matrices."""
    from .lindblad import hermitian_basis

    full = np.zeros((x.shape[0], 9))
    full[:, gens.index] = x
    return np.einsum("ka,aij->kij", full, hermitian_basis(3))
