"""Lindblad master-equation integration on small Hilbert spaces.

States are propagated as real coordinate vectors in an orthonormal basis of
Hermitian matrices, which makes every Liouvillian a real matrix. Only the
coordinates reachable from the initial state are integrated.

The dissipator convention is ``D[C] rho = C rho C^dag - 1/2 {C^dag C, rho}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .quantum import DensityMatrix, HermitianOperator, check_density_matrices

COLLAPSE_LABELS = ("radiative_decay", "pure_dephasing", "spin_relaxation", "custom")
DEPHASING_CONVENTIONS = ("relation", "literal")

TRACE_FAIL = 1e-6
NEGATIVITY_FAIL = -1e-6
_ZERO = 1e-14


class IntegrationError(RuntimeError):
    """Raised when a recorded state drifts away from a valid density matrix."""


# --------------------------------------------------------------------------
# model types


@dataclass(frozen=True)
class CollapseOperator:
    """Jump operator with its rate folded into the matrix (units us^-1/2)."""

    matrix: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"collapse operator must be square, got {m.shape}")
        if self.label not in COLLAPSE_LABELS:
            raise ValueError(f"unknown collapse label {self.label!r}; expected one of {COLLAPSE_LABELS}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def rate(self):
        """Largest eigenvalue of ``C^dag C``."""
        cc = self.matrix.conj().T @ self.matrix
        return float(np.max(np.linalg.eigvalsh(cc)))


@dataclass(frozen=True)
class DriveTerm:
    """Time-dependent Hamiltonian piece ``coefficient(t) * operator``.

    ``bound`` is an upper bound on ``|coefficient(t)|``; it feeds the step
    size check in :func:`evolve`.
    """

    operator: np.ndarray
    coefficient: Callable[[float], float]
    bound: float = 1.0

    def __post_init__(self):
        op = np.array(HermitianOperator(self.operator).matrix)
        op.setflags(write=False)
        object.__setattr__(self, "operator", op)


class LindbladModel:
    """Hamiltonian ``H0 + sum_j f_j(t) H_j`` plus a list of collapse operators.

    Parameters
    ----------
    dim : int
    h0 : array_like, optional
        Static part in rad/us.
    drives : sequence of DriveTerm
    collapse : sequence of CollapseOperator
    hamiltonian : callable, optional
        Generic ``t -> H(t)``; replaces ``h0``/``drives``. Needs ``norm_bound``.
    norm_bound : float, optional
        Bound on ``||H(t)||`` for a generic callable.
    """

    def __init__(self, dim, h0=None, drives=(), collapse=(), hamiltonian=None, norm_bound=None):
        self.dim = int(dim)
        if hamiltonian is not None and (h0 is not None or drives):
            raise ValueError("give either a Hamiltonian callable or h0/drives, not both")
        if hamiltonian is not None and norm_bound is None:
            raise ValueError("a generic Hamiltonian callable needs norm_bound")
        self.h0 = np.zeros((self.dim, self.dim), complex) if h0 is None else HermitianOperator(h0).matrix
        self.drives = tuple(drives)
        self.collapse = tuple(collapse)
        self._callable = hamiltonian
        self._norm_bound = norm_bound
        for op in [self.h0] + [d.operator for d in self.drives] + [c.matrix for c in self.collapse]:
            if op.shape != (self.dim, self.dim):
                raise ValueError(f"operator shape {op.shape} does not match model dimension {self.dim}")

    @property
    def is_time_independent(self):
        return self._callable is None and not self.drives

    def hamiltonian(self, t) -> HermitianOperator:
        if self._callable is not None:
            h = HermitianOperator(self._callable(t))
            if h.dim != self.dim:
                raise ValueError(f"hamiltonian(t) has dimension {h.dim}, expected {self.dim}")
            return h
        m = self.h0.copy()
        for d in self.drives:
            m = m + d.coefficient(t) * d.operator
        return HermitianOperator(m)

    def norm_bound(self):
        """Upper bound on the spectral norm of ``H(t)``."""
        if self._callable is not None:
            return float(self._norm_bound)
        total = np.linalg.norm(self.h0, 2)
        for d in self.drives:
            total += abs(d.bound) * np.linalg.norm(d.operator, 2)
        return float(total)

    def relaxation_times(self):
        rates = [c.rate for c in self.collapse]
        return [1.0 / r for r in rates if r > 0]


@dataclass(frozen=True)
class PulseEnvelope:
    """Unit-height optical pulse between ``t_on`` and ``t_off`` (us).

    ``shape='smoothed'`` replaces the hard edges by error functions of width
    ``rise``.
    """

    t_on: float = 0.0
    t_off: float = 0.080
    shape: str = "rectangular"
    rise: float = 0.0

    def __post_init__(self):
        if not self.t_off > self.t_on:
            raise ValueError(f"pulse needs t_off > t_on, got {self.t_on}, {self.t_off}")
        if self.shape not in ("rectangular", "smoothed"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if self.shape == "smoothed" and not self.rise > 0:
            raise ValueError("smoothed pulse needs rise > 0")

    @property
    def breakpoints(self):
        """Discontinuities that :func:`evolve` steps onto exactly."""
        return (self.t_on, self.t_off) if self.shape == "rectangular" else ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape == "rectangular":
            out = ((t >= self.t_on) & (t < self.t_off)).astype(float)
        else:
            out = 0.5 * (erf((t - self.t_on) / self.rise) - erf((t - self.t_off) / self.rise))
            out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    observables: dict = field(default_factory=dict)

    def state(self, k) -> DensityMatrix:
        return DensityMatrix(self.states[k])

    def population(self, index):
        return self.states[:, index, index].real.copy()


# --------------------------------------------------------------------------
# real Liouville space


def hermitian_basis(dim):
    """Orthonormal Hermitian basis ``B_a`` with ``tr(B_a B_b) = delta_ab``.

    Diagonal projectors come first, then for each pair ``j < k`` the
    symmetric and antisymmetric combinations.
    """
    basis = []
    for k in range(dim):
        b = np.zeros((dim, dim), complex)
        b[k, k] = 1.0
        basis.append(b)
    r = 1.0 / math.sqrt(2.0)
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), complex)
            sym[j, k] = sym[k, j] = r
            asym = np.zeros((dim, dim), complex)
            asym[j, k] = -1j * r
            asym[k, j] = 1j * r
            basis.extend([sym, asym])
    return np.array(basis)


def _basis_matrix(dim):
    return hermitian_basis(dim).reshape(dim * dim, dim * dim).T


def to_real(rho, dim=None):
    rho = np.asarray(rho, dtype=complex)
    b = hermitian_basis(rho.shape[0])
    return np.real(np.einsum("aij,ji->a", b, rho))


def from_real(x, dim):
    b = hermitian_basis(dim)
    return np.einsum("a,aij->ij", np.asarray(x, dtype=float), b)


def commutator_superoperator(h):
    """Complex row-major superoperator of ``rho -> -i [H, rho]``."""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def dissipator_superoperator(c):
    c = np.asarray(c, dtype=complex)
    eye = np.eye(c.shape[0])
    cc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * np.kron(cc, eye) - 0.5 * np.kron(eye, cc.T)


def real_superoperator(sup, dim):
    """Express a Hermiticity-preserving superoperator in the real basis."""
    v = _basis_matrix(dim)
    r = v.conj().T @ sup @ v
    scale = max(1.0, float(np.max(np.abs(r))))
    if np.max(np.abs(r.imag)) > 1e-10 * scale:
        raise ValueError("superoperator does not preserve Hermiticity")
    out = r.real.copy()
    out[np.abs(out) < _ZERO * scale] = 0.0
    return out


def real_generators(model: LindbladModel):
    """``(G0, [G_j])`` real Liouvillian pieces of a structured model."""
    d = model.dim
    g0 = real_superoperator(commutator_superoperator(model.h0), d)
    for c in model.collapse:
        g0 = g0 + real_superoperator(dissipator_superoperator(c.matrix), d)
    gj = [real_superoperator(commutator_superoperator(t.operator), d) for t in model.drives]
    return g0, gj


def coupled_subspace(generators: Sequence[np.ndarray], x0):
    """Indices reachable from the support of ``x0`` under the generators."""
    pattern = np.zeros_like(generators[0], dtype=bool)
    for g in generators:
        pattern |= g != 0.0
    active = np.abs(np.asarray(x0)) > 0
    while True:
        grown = active | pattern[:, active].any(axis=1)
        if np.array_equal(grown, active):
            return np.nonzero(active)[0]
        active = grown


def trace_row(dim, idx=None):
    t = np.zeros(dim * dim)
    t[:dim] = 1.0
    return t if idx is None else t[idx]


def rk4_step_matrix(l1, l2, l3, h):
    """Exact matrix form of one classical RK4 step for ``x' = L(t) x``.

    ``l1, l2, l3`` are the generator at the start, midpoint and end.
    """
    k1 = l1
    k2 = l2 + 0.5 * h * (l2 @ k1)
    k3 = l2 + 0.5 * h * (l2 @ k2)
    k4 = l3 + h * (l3 @ k3)
    return np.eye(l1.shape[0]) + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# --------------------------------------------------------------------------
# integration


def max_stable_step(model: LindbladModel):
    """Largest ``dt`` accepted by :func:`evolve` for this model."""
    limits = []
    hn = model.norm_bound()
    if hn > 0:
        limits.append(0.05 / hn)
    relax = model.relaxation_times()
    if relax:
        limits.append(0.05 * min(relax))
    return min(limits) if limits else math.inf


def _physicality(states, times):
    for k in range(len(times)):
        tr, herm, lo = check_density_matrices(states[k], 0, 0, 0)
        if tr > TRACE_FAIL or lo < NEGATIVITY_FAIL:
            raise IntegrationError(
                f"state at t={times[k]!r} us left the physical set "
                f"(trace drift {tr:.3e}, min eigenvalue {lo:.3e}); reduce dt"
            )


def evolve(rho0, model: LindbladModel, times, dt, check=True) -> Trajectory:
    """Integrate the master equation with fixed-step RK4.

    Parameters
    ----------
    rho0 : DensityMatrix or array_like
        State at ``times[0]``.
    model : LindbladModel
    times : array_like
        Strictly increasing record times (us).
    dt : float
        Maximum step (us). Each record interval is split into equal steps no
        longer than ``dt``, so record times are hit exactly. Drive
        coefficients with a ``breakpoints`` attribute (rectangular pulses)
        also get their discontinuities as step boundaries.
    check : bool
        Verify physicality at every record point.

    Returns
    -------
    Trajectory

    Raises
    ------
    ValueError
        ``dt`` above :func:`max_stable_step` or non-monotone ``times``.
    IntegrationError
        Trace drift above 1e-6 or an eigenvalue below -1e-6 at a record point.
    """
    rho0 = DensityMatrix(rho0).matrix
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D grid")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    limit = max_stable_step(model)
    if not 0 < dt <= limit * (1 + 1e-12):
        raise ValueError(f"dt={dt!r} violates the step bound {limit:.4g} us")
    d = model.dim
    if rho0.shape != (d, d):
        raise ValueError("initial state dimension does not match the model")

    x_full = to_real(rho0)
    generic = model._callable is not None
    if generic:
        idx = np.arange(d * d)
        g0, gj = None, []
    else:
        g0, gj = real_generators(model)
        idx = coupled_subspace([g0] + gj, x_full)
        g0 = g0[np.ix_(idx, idx)]
        gj = [g[np.ix_(idx, idx)] for g in gj]
        dissip = None
    if generic:
        dissip = sum(
            (real_superoperator(dissipator_superoperator(c.matrix), d) for c in model.collapse),
            np.zeros((d * d, d * d)),
        )

    def generator(t):
        if generic:
            return real_superoperator(commutator_superoperator(model.hamiltonian(t).matrix), d) + dissip
        out = g0
        for term, g in zip(model.drives, gj):
            c = term.coefficient(t)
            if c != 0.0:
                out = out + c * g
        return out

    cache = {}

    def step_matrix(t, h):
        # end stages sit just inside the step so a jump at either end is seen one-sidedly
        eps = 1e-9 * h
        stages = (t + eps, t + 0.5 * h, t + h - eps)
        if generic:
            return rk4_step_matrix(*(generator(s) for s in stages), h)
        key = (h,) + tuple(float(term.coefficient(s)) for term in model.drives for s in stages)
        m = cache.get(key)
        if m is None:
            m = rk4_step_matrix(*(generator(s) for s in stages), h)
            if len(cache) > 256:
                cache.clear()
            cache[key] = m
        return m

    edges = sorted({float(b) for term in model.drives for b in getattr(term.coefficient, "breakpoints", ())})
    x = x_full[idx]
    out = np.empty((times.size, idx.size))
    out[0] = x
    for k in range(1, times.size):
        t0, t1 = times[k - 1], times[k]
        cuts = [t0] + [b for b in edges if t0 < b < t1] + [t1]
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(1, math.ceil((b - a) / dt - 1e-9))
            h = (b - a) / n
            for i in range(n):
                x = step_matrix(a + i * h, h) @ x
        out[k] = x

    full = np.zeros((times.size, d * d))
    full[:, idx] = out
    basis = hermitian_basis(d)
    states = np.einsum("ka,aij->kij", full, basis)
    if check:
        _physicality(states, times)
    return Trajectory(times=times, states=states)


# --------------------------------------------------------------------------
# steady state


@dataclass(frozen=True)
class SteadyState:
    state: DensityMatrix
    kernel_dim: int
    absorbing: bool
    method: str


def _trapping_levels(g_full, dim):
    """Diagonal coordinates whose Liouvillian column vanishes (no way out)."""
    return [k for k in range(dim) if not np.any(g_full[:, k] != 0.0)]


def _long_time(g, x0, t_total, h):
    n = max(1, math.ceil(t_total / h))
    m = rk4_step_matrix(g, g, g, t_total / n)
    x = x0.copy()
    while n:
        if n & 1:
            x = m @ x
        m = m @ m
        n >>= 1
    return x


def steady_state(model: LindbladModel, rho0=None, rcond=1e-12) -> SteadyState:
    """Stationary state of a time-independent model.

    The Liouvillian is restricted to the coordinates reachable from ``rho0``
    (default: the first basis state). A one-dimensional kernel is solved
    directly with the trace constraint. Otherwise, or when that solve is
    ill-conditioned, the state is evolved for 50 times the slowest
    relaxation time instead.
    """
    if not model.is_time_independent:
        raise ValueError("steady_state needs a time-independent Hamiltonian")
    d = model.dim
    if rho0 is None:
        rho0 = np.zeros((d, d))
        rho0[0, 0] = 1.0
    x0 = to_real(DensityMatrix(rho0).matrix)
    g_full, _ = real_generators(model)
    idx = coupled_subspace([g_full], x0)
    g = g_full[np.ix_(idx, idx)]
    tr = trace_row(d, idx)

    sv = np.linalg.svd(g, compute_uv=False)
    scale = sv[0] if sv.size and sv[0] > 0 else 1.0
    kernel_dim = int(np.sum(sv <= 1e-10 * scale))

    x = None
    method = "linear"
    if kernel_dim == 1:
        a = np.vstack([g, tr])
        rhs = np.zeros(idx.size + 1)
        rhs[-1] = 1.0
        sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        s_aug = np.linalg.svd(a, compute_uv=False)
        if s_aug[-1] > rcond * s_aug[0]:
            x = sol
    if x is None:
        method = "long_time"
        relax = model.relaxation_times()
        if not relax:
            raise ValueError("steady state is undefined without relaxation channels")
        t_total = 50.0 * max(relax)
        x = _long_time(g, x0[idx], t_total, max_stable_step(model))

    full = np.zeros(d * d)
    full[idx] = x
    rho = from_real(full, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    traps = _trapping_levels(g_full, d)
    absorbing = kernel_dim != 1 or any(rho[k, k].real > 1 - 1e-9 for k in traps)
    if absorbing:
        warnings.warn("steady state is absorbing or not unique", RuntimeWarning, stacklevel=2)
    return SteadyState(DensityMatrix(rho, positivity_atol=1e-7), kernel_dim, absorbing, method)


# --------------------------------------------------------------------------
# three-level optical model

G, E, S = 0, 1, 2


def _ket_bra(i, j, dim=3):
    m = np.zeros((dim, dim), complex)
    m[i, j] = 1.0
    return m


def dephasing_operator(t2_star, convention="relation", dim=3):
    """``(|e><e| - |g><g|)`` scaled so the coherence loses ``1/T2*``.

    ``convention='literal'`` uses ``1/sqrt(T2*)``, which doubles that rate.
    """
    if convention not in DEPHASING_CONVENTIONS:
        raise ValueError(f"unknown dephasing convention {convention!r}")
    scale = 1.0 / math.sqrt((2.0 if convention == "relation" else 1.0) * t2_star)
    return CollapseOperator(scale * (_ket_bra(E, E, dim) - _ket_bra(G, G, dim)), "pure_dephasing")


def bloch_collapse_operators(t1, t2_star=math.inf, gamma=0.0, repump=0.0, convention="relation"):
    if not t1 > 0:
        raise ValueError(f"T1 must be positive, got {t1}")
    if not t2_star > 0:
        raise ValueError(f"T2* must be positive or infinite, got {t2_star}")
    if gamma < 0 or repump < 0:
        raise ValueError("rates must be non-negative")
    ops = [CollapseOperator(_ket_bra(G, E) / math.sqrt(t1), "radiative_decay")]
    if math.isfinite(t2_star):
        ops.append(dephasing_operator(t2_star, convention))
    if gamma > 0:
        ops.append(CollapseOperator(math.sqrt(gamma) * _ket_bra(S, E), "spin_relaxation"))
    if repump > 0:
        ops.append(CollapseOperator(math.sqrt(repump) * _ket_bra(G, S), "custom"))
    return ops


def t2_from(t1, t2_star):
    """``T2 = (1/(2 T1) + 1/T2*)^-1``."""
    return 1.0 / (0.5 / t1 + (0.0 if math.isinf(t2_star) else 1.0 / t2_star))


def t2_star_from(t1, t2):
    """Inverse of :func:`t2_from`; ``inf`` at the lifetime limit."""
    rate = 1.0 / t2 - 0.5 / t1
    if rate < -1e-12 / t2:
        raise ValueError(f"T2={t2} exceeds the lifetime limit 2*T1={2 * t1}")
    return math.inf if rate <= 0 else 1.0 / rate


def three_level_bloch_model(
    rabi,
    detuning,
    t1,
    t2_star=math.inf,
    gamma=0.0,
    envelope: PulseEnvelope | None = None,
    drive=None,
    repump=0.0,
    convention="relation",
) -> LindbladModel:
    """Optical three-level model over ``(|g>, |e>, |s>)``.

    ``H = (rabi env(t)/2)(|g><e| + |e><g|) + (detuning + stark(t)) |e><e|``
    with radiative decay ``|g><e|/sqrt(T1)``, pure dephasing, trapping
    ``sqrt(gamma)|s><e|`` and an optional repump ``sqrt(repump)|g><s|``.

    Parameters
    ----------
    rabi, detuning : float
        rad/us.
    t1, t2_star : float
        us. ``t2_star=inf`` disables pure dephasing.
    gamma, repump : float
        1/us.
    envelope : PulseEnvelope, optional
        Multiplies the optical coupling; ``None`` means always on.
    drive : AcDrive, optional
        Longitudinal Stark modulation on ``|e>``.
    convention : {'relation', 'literal'}
        Dephasing normalisation, see :func:`dephasing_operator`.
    """
    if rabi < 0:
        raise ValueError("rabi must be >= 0")
    coupling = 0.5 * rabi * (_ket_bra(G, E) + _ket_bra(E, G))
    proj_e = _ket_bra(E, E)
    h0 = detuning * proj_e
    drives = []
    if envelope is None:
        h0 = h0 + coupling
    else:
        drives.append(DriveTerm(coupling, envelope, 1.0))
    if drive is not None:
        bound = sum(abs(t.amplitude) for t in drive.tones)
        drives.append(DriveTerm(proj_e, lambda t, d=drive: float(d.stark_shift(t)), bound))
    return LindbladModel(
        3,
        h0=h0,
        drives=drives,
        collapse=bloch_collapse_operators(t1, t2_star, gamma, repump, convention),
    )


def emission_signal(traj: Trajectory, t1, window, excited=E):
    """``int rho_ee / T1 dt`` over ``window`` by the trapezoid rule."""
    ta, tb = window
    if ta < traj.times[0] - 1e-12 or tb > traj.times[-1] + 1e-12 or tb < ta:
        raise ValueError(f"window {window} outside trajectory span")
    sel = (traj.times >= ta - 1e-12) & (traj.times <= tb + 1e-12)
    t = traj.times[sel]
    if t.size < 2:
        return 0.0
    return float(np.trapezoid(traj.states[sel, excited, excited].real, t) / t1)


@dataclass(frozen=True)
class OpticalBlochParams:
    """Parameters of the three-level optical model (rad/us, us, 1/us)."""

    rabi: float
    t1: float
    t2_star: float = math.inf
    gamma: float = 0.0
    repump: float = 0.0
    convention: str = "relation"

    def __post_init__(self):
        bloch_collapse_operators(self.t1, self.t2_star, self.gamma, self.repump, self.convention)
        if self.rabi < 0:
            raise ValueError("rabi must be >= 0")

    @property
    def t2(self):
        return t2_from(self.t1, self.t2_star)

    @property
    def traps(self):
        return self.gamma > 0 and self.repump == 0

    def scaled(self, lam):
        """Multiply every rate by ``lam`` (times divided by ``lam``)."""
        return OpticalBlochParams(
            self.rabi * lam, self.t1 / lam, self.t2_star / lam, self.gamma * lam, self.repump * lam,
            self.convention,
        )

    def model(self, detuning=0.0, envelope=None, drive=None) -> LindbladModel:
        return three_level_bloch_model(
            self.rabi, detuning, self.t1, self.t2_star, self.gamma, envelope, drive, self.repump,
            self.convention,
        )
