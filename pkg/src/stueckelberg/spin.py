"""Ground-state spin-1 Hamiltonian, its eigensystem and the ZEFOZ point.

Everything in this module is expressed as H/h in MHz (linear frequency), with
magnetic fields in mT. Conventions that differ from a naive reading of the
textbook Hamiltonian:

* The transverse zero-field term is ``(E/2)(S+^2 + S-^2)`` so that ``|+1>``
  and ``|-1>`` are coupled by exactly ``E`` and the zero-field transitions sit
  at ``D +/- E``.
* Hyperfine tensors act on Pauli-normalised nuclear operators (eigenvalues
  +/-1), so ``A_zz`` is the full electron-level shift for each nuclear
  orientation and the ZEFOZ field is ``-/+ A_zz / (g mu_B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quantum import (
    HermitianOperator,
    eigendecompose_hermitian,
    spin1_operators,
)

MU_B_MHZ_PER_MT = 13.996
"""Bohr magneton over h, in MHz/mT (per unit g)."""

_BRANCHES = ("up", "down")


@dataclass(frozen=True)
class SpinSystemParams:
    """Parameters of the ground-state spin Hamiltonian.

    Attributes
    ----------
    d, e : float
        Zero-field splittings in MHz.
    g : float
        Electron g-factor.
    b : tuple of float
        Magnetic field ``(Bx, By, Bz)`` in mT.
    hyperfine : tuple of 3x3 arrays
        One symmetric tensor (MHz) per spin-1/2 nucleus.
    """

    d: float
    e: float
    g: float = 2.0
    b: tuple = (0.0, 0.0, 0.0)
    hyperfine: tuple = field(default=())

    def __post_init__(self):
        b = tuple(float(x) for x in self.b)
        if len(b) != 3:
            raise ValueError("magnetic field must have three components")
        object.__setattr__(self, "b", b)
        tensors = []
        for a in self.hyperfine:
            a = np.array(a, dtype=float)
            if a.shape != (3, 3):
                raise ValueError(f"hyperfine tensor must be 3x3, got {a.shape}")
            if np.max(np.abs(a - a.T)) > 1e-9:
                raise ValueError("hyperfine tensors must be symmetric")
            a.setflags(write=False)
            tensors.append(a)
        object.__setattr__(self, "hyperfine", tuple(tensors))

    @property
    def gamma(self):
        """Electron gyromagnetic ratio ``g mu_B / h`` in MHz/mT."""
        return self.g * MU_B_MHZ_PER_MT

    @property
    def n_nuclei(self):
        return len(self.hyperfine)

    def with_field(self, bz=None, b=None):
        if b is None:
            b = (self.b[0], self.b[1], bz)
        return SpinSystemParams(self.d, self.e, self.g, b, self.hyperfine)


def axial_hyperfine(azz):
    """Hyperfine tensor with only the ``zz`` component set."""
    return np.diag([0.0, 0.0, float(azz)])


def build_ground_hamiltonian(p: SpinSystemParams) -> HermitianOperator:
    """H/h (MHz) on the electron (x) nuclear space, dimension ``3 * 2**N``.

    Nuclear Zeeman terms are omitted.
    """
    sx, sy, sz = (s.matrix for s in spin1_operators())
    sp = sx + 1j * sy
    sm = sx - 1j * sy
    n = p.n_nuclei
    nuc_dim = 2**n
    eye_n = np.eye(nuc_dim)

    h_e = p.d * (sz @ sz - (2.0 / 3.0) * np.eye(3))
    h_e = h_e + 0.5 * p.e * (sp @ sp + sm @ sm)
    h_e = h_e + p.gamma * (p.b[0] * sx + p.b[1] * sy + p.b[2] * sz)
    h = np.kron(h_e, eye_n)

    # nuclear basis {up, down}, Pauli-normalised
    ix = np.array([[0, 1], [1, 0]], dtype=complex)
    iy = np.array([[0, -1j], [1j, 0]])
    iz = np.diag([1.0, -1.0])
    s_vec = (sx, sy, sz)
    i_vec = (ix, iy, iz)
    for k, a in enumerate(p.hyperfine):
        left = 2**k
        right = 2 ** (n - k - 1)
        for r in range(3):
            for c in range(3):
                if a[r, c] == 0.0:
                    continue
                nuc = np.kron(np.kron(np.eye(left), i_vec[c]), np.eye(right))
                h = h + a[r, c] * np.kron(s_vec[r], nuc)
    return HermitianOperator(0.5 * (h + h.conj().T))


@dataclass(frozen=True)
class AnalyticSpectrum:
    """Closed-form eigensystem for one nucleus and an axial field.

    ``energies`` follow the convention where ``|0>`` sits at zero; add
    ``offset`` to compare with :func:`build_ground_hamiltonian`.
    """

    energies: np.ndarray
    labels: tuple
    states: np.ndarray
    offset: float


def _pair_vectors(x, e):
    """Upper/lower normalised eigenvectors of ``[[x, e], [e, -x]]``."""
    r = np.hypot(x, e)
    up_a, up_b = (r + x, e), (e, r - x)
    lo_a, lo_b = (-e, r + x), (-(r - x), e)
    up = max(up_a, up_b, key=lambda v: np.hypot(*v))
    lo = max(lo_a, lo_b, key=lambda v: np.hypot(*v))
    if np.hypot(*up) == 0.0:
        up, lo = (1.0, 0.0), (0.0, 1.0)
    up = np.array(up) / np.hypot(*up)
    lo = np.array(lo) / np.hypot(*lo)
    return r, up, lo


def analytic_spectrum(p: SpinSystemParams) -> AnalyticSpectrum:
    """Six eigenpairs for one nucleus with ``Bx = By = 0``; only ``A_zz`` is used.

    Energies are ``D +/- sqrt((g mu_B C)^2 + E^2)`` with
    ``C = Bz +/- A_zz/(g mu_B)``, plus two states at zero. Vectors are
    normalised and ordered as ``|m_s> (x) |m_I>`` with ``m_s = +1, 0, -1``
    and ``m_I = up, down``.
    """
    if p.n_nuclei != 1:
        raise ValueError(f"analytic spectrum needs exactly one nucleus, got {p.n_nuclei}")
    if p.b[0] != 0.0 or p.b[1] != 0.0:
        raise ValueError("analytic spectrum requires Bx = By = 0")
    azz = p.hyperfine[0][2, 2]
    c_up = p.b[2] + azz / p.gamma
    c_dn = p.b[2] - azz / p.gamma

    def ket(m_index, nuc_index, amp=1.0):
        v = np.zeros(6, dtype=complex)
        v[2 * m_index + nuc_index] = amp
        return v

    energies, states = [], []
    pairs = {}
    for nuc, c in ((0, c_up), (1, c_dn)):
        pairs[nuc] = _pair_vectors(p.gamma * c, p.e)
    # |1>, |2> : D + r ; |3>, |4> : D - r
    for nuc in (0, 1):
        r, up, _ = pairs[nuc]
        energies.append(p.d + r)
        states.append(ket(0, nuc, up[0]) + ket(2, nuc, up[1]))
    for nuc in (0, 1):
        r, _, lo = pairs[nuc]
        energies.append(p.d - r)
        states.append(ket(0, nuc, lo[0]) + ket(2, nuc, lo[1]))
    for nuc in (0, 1):
        energies.append(0.0)
        states.append(ket(1, nuc))
    return AnalyticSpectrum(
        energies=np.array(energies),
        labels=("1", "2", "3", "4", "5", "6"),
        states=np.array(states).T,
        offset=-2.0 * p.d / 3.0,
    )


@dataclass(frozen=True)
class ZefozBasis:
    """Zero-field effective Hamiltonian and its eigenbasis.

    Matrices use the ordering ``(|+>, |0>, |->)`` of the transformed basis
    (``index`` maps labels to rows); ``h_zefoz`` is in ``(|+1>, |0>, |-1>)``.
    """

    d: float
    e: float
    energies: tuple
    labels: tuple
    h_zefoz: np.ndarray
    u: np.ndarray
    h_diag: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    index: dict

    def transition(self, a, b):
        ea = self.energies[self.labels.index(a)]
        eb = self.energies[self.labels.index(b)]
        return abs(ea - eb)


def zefoz_basis(d, e) -> ZefozBasis:
    """Build the ZEFOZ Hamiltonian, the rotation ``U`` and rotated spin matrices.

    ``U`` has columns ``|+>``, ``|0>``, ``|->`` with
    ``|+/-> = (|+1> +/- |-1>)/sqrt(2)``; it is real symmetric and squares to
    the identity. The rotated ``Sy'`` carries ``+/-i`` phases on its two
    non-zero entries.
    """
    h = np.array([[d, 0.0, e], [0.0, 0.0, 0.0], [e, 0.0, d]], dtype=complex)
    s = 1.0 / np.sqrt(2.0)
    u = np.array([[s, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, -s]], dtype=complex)
    h_diag = u.conj().T @ h @ u
    sx, sy, sz = (op.matrix for op in spin1_operators())
    rot = [u.conj().T @ op @ u for op in (sx, sy, sz)]
    for m in rot:
        m[np.abs(m) < 1e-15] = 0.0
    h_diag[np.abs(h_diag) < 1e-15 * max(abs(d), abs(e), 1.0)] = 0.0
    for m in (h, u, h_diag, *rot):
        m.setflags(write=False)
    return ZefozBasis(
        d=float(d),
        e=float(e),
        energies=(0.0, d + e, d - e),
        labels=("0", "+", "-"),
        h_zefoz=h,
        u=u,
        h_diag=h_diag,
        sx=rot[0],
        sy=rot[1],
        sz=rot[2],
        index={"+": 0, "0": 1, "-": 2},
    )


def zefoz_field(p: SpinSystemParams, branch="up"):
    """Closed-form ZEFOZ field ``-/+ A_zz/(g mu_B)`` (mT); zero without nuclei."""
    if branch not in _BRANCHES:
        raise ValueError(f"branch must be one of {_BRANCHES}, got {branch!r}")
    if p.n_nuclei == 0:
        return 0.0
    azz = p.hyperfine[0][2, 2]
    return -azz / p.gamma if branch == "up" else azz / p.gamma


def _reference_kets(p: SpinSystemParams, branch):
    """|0>, |+>, |-> (x) nuclear branch state, used to seed label tracking."""
    n = p.n_nuclei
    nuc = np.zeros(2**n)
    nuc[0 if branch == "up" else (1 << (n - 1)) if n else 0] = 1.0
    if n == 0:
        nuc = np.ones(1)
    s = 1.0 / np.sqrt(2.0)
    zero = np.array([0.0, 1.0, 0.0])
    plus = np.array([s, 0.0, s])
    minus = np.array([s, 0.0, -s])
    return [np.kron(k, nuc).astype(complex) for k in (zero, plus, minus)]


def _track(vecs, refs):
    """Indices of eigenvectors (columns) with maximal overlap to each reference."""
    overlaps = np.abs(refs.conj() @ vecs) ** 2
    chosen = []
    for row in overlaps:
        row = row.copy()
        row[chosen] = -1.0
        chosen.append(int(np.argmax(row)))
    return chosen


def transition_dispersion(p: SpinSystemParams, bz_grid, branch="up"):
    """Transition frequencies ``nu_{0<->+}`` and ``nu_{+<->-}`` (MHz) versus ``Bz``.

    Labels are carried by maximum-overlap continuation outward from the ZEFOZ
    field of the selected nuclear branch, so curves stay on their physical
    branch through crossings.

    Returns
    -------
    nu_zero_plus, nu_plus_minus : ndarray
    """
    bz = np.asarray(bz_grid, dtype=float)
    if bz.ndim != 1 or bz.size == 0:
        raise ValueError("bz_grid must be a non-empty 1-D grid")
    if np.any(np.diff(bz) <= 0):
        raise ValueError("bz_grid must be strictly increasing")
    b_star = zefoz_field(p, branch)
    refs = np.array(_reference_kets(p, branch))

    w0, v0 = eigendecompose_hermitian(build_ground_hamiltonian(p.with_field(bz=b_star)))
    idx = _track(v0, refs)
    seed = v0[:, idx].T

    start = int(np.searchsorted(bz, b_star))
    energies = np.empty((bz.size, 3))
    for order in (range(start, bz.size), range(start - 1, -1, -1)):
        prev = seed
        for i in order:
            w, v = eigendecompose_hermitian(build_ground_hamiltonian(p.with_field(bz=bz[i])))
            idx = _track(v, prev)
            energies[i] = w[idx]
            prev = v[:, idx].T
    nu_zero_plus = energies[:, 1] - energies[:, 0]
    nu_plus_minus = energies[:, 1] - energies[:, 2]
    return nu_zero_plus, nu_plus_minus


def _branch_splitting(p: SpinSystemParams, bz, branch):
    h = build_ground_hamiltonian(p.with_field(bz=bz)).matrix
    nuc = 0 if branch == "up" else 1
    idx = [2 * m + nuc for m in range(3)]
    w, _ = eigendecompose_hermitian(h[np.ix_(idx, idx)])
    return w[2] - w[1]


def find_zefoz_field(p: SpinSystemParams, branch="up", bracket=None, step=1e-3, xtol=1e-10):
    """Locate the ZEFOZ field (mT) by bisection on a finite-difference slope.

    The slope of the ``|+> <-> |->`` splitting within the selected nuclear
    branch is evaluated by central differences with ``step`` (mT).
    """
    if p.n_nuclei != 1:
        raise ValueError(f"ZEFOZ search needs exactly one nucleus, got {p.n_nuclei}")
    if branch not in _BRANCHES:
        raise ValueError(f"branch must be one of {_BRANCHES}, got {branch!r}")
    if bracket is None:
        span = 2.0 * abs(p.hyperfine[0][2, 2]) / p.gamma + 1.0
        bracket = (-span, span)
    lo, hi = map(float, bracket)

    def slope(b):
        return (_branch_splitting(p, b + step, branch) - _branch_splitting(p, b - step, branch)) / (
            2.0 * step
        )

    f_lo, f_hi = slope(lo), slope(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValueError(f"no sign change of the dispersion slope in bracket [{lo}, {hi}] mT")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        f_mid = slope(mid)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
