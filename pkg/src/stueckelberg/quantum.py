"""Dense operators and states for small quantum systems.

Matrices are plain complex ``numpy`` arrays. :class:`HermitianOperator` and
:class:`DensityMatrix` wrap them with the physical-validity checks that the
rest of the package relies on. Frequencies are angular (rad/us) unless a
function says otherwise.
"""

from __future__ import annotations

import numpy as np

HERMITICITY_ATOL = 1e-12
TRACE_ATOL = 1e-9
POSITIVITY_ATOL = 1e-9


class EigensolverError(RuntimeError):
    """Raised when the Jacobi sweep limit is reached before convergence."""


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


class HermitianOperator:
    """Square Hermitian matrix, immutable after construction.

    Parameters
    ----------
    matrix : array_like
        Square matrix. Must satisfy ``max|M - M^dagger| <= atol``.
    atol : float
        Hermiticity tolerance.
    """

    __slots__ = ("_matrix",)

    def __init__(self, matrix, atol=HERMITICITY_ATOL):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if err > atol:
            raise ValueError(f"matrix is not Hermitian (max |M - M^dag| = {err:.3e})")
        self._matrix = _frozen(m)

    @property
    def matrix(self):
        return self._matrix

    @property
    def dim(self):
        return self._matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._matrix if dtype is None else self._matrix.astype(dtype)

    def __add__(self, other):
        return HermitianOperator(self._matrix + _as_matrix(other))

    __radd__ = __add__

    def __sub__(self, other):
        return HermitianOperator(self._matrix - _as_matrix(other))

    def __mul__(self, scalar):
        if np.iscomplexobj(scalar) and np.imag(scalar) != 0:
            raise TypeError("Hermitian operators may only be scaled by real numbers")
        return HermitianOperator(self._matrix * float(np.real(scalar)))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return self._matrix @ _as_matrix(other)

    def __eq__(self, other):
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        return np.array_equal(self._matrix, other._matrix)

    def __hash__(self):
        return hash(self._matrix.tobytes())

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    __slots__ = ("_matrix",)

    def __init__(self, matrix, trace_atol=TRACE_ATOL, positivity_atol=POSITIVITY_ATOL):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITICITY_ATOL:
            raise ValueError(f"density matrix is not Hermitian ({herm:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > trace_atol:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -positivity_atol:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        self._matrix = _frozen(m)

    @classmethod
    def pure(cls, ket):
        ket = np.asarray(ket, dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()))

    @classmethod
    def basis(cls, dim, index):
        ket = np.zeros(dim)
        ket[index] = 1.0
        return cls.pure(ket)

    @property
    def matrix(self):
        return self._matrix

    @property
    def dim(self):
        return self._matrix.shape[0]

    def population(self, index):
        return float(self._matrix[index, index].real)

    def __array__(self, dtype=None, copy=None):
        return self._matrix if dtype is None else self._matrix.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def _as_matrix(x):
    if isinstance(x, (HermitianOperator, DensityMatrix)):
        return x.matrix
    return np.asarray(x, dtype=complex)


def check_density_matrices(states, trace_atol, herm_atol, positivity_atol):
    """Vectorised validity check on a stack of density matrices.

    Returns ``(trace_err, herm_err, min_eig)`` and raises nothing; callers
    decide what to do with violations.
    """
    states = np.asarray(states)
    if states.ndim == 2:
        states = states[None]
    trace_err = np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1.0))
    herm_err = np.max(np.abs(states - np.conj(np.swapaxes(states, 1, 2))))
    sym = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    min_eig = np.min(np.linalg.eigvalsh(sym))
    return float(trace_err), float(herm_err), float(min_eig)


def pauli_matrices():
    """Return ``(sx, sy, sz)`` in the ``{|g>, |e>}`` basis with ``sz = |e><e| - |g><g|``."""
    sx = HermitianOperator([[0, 1], [1, 0]])
    sy = HermitianOperator([[0, 1j], [-1j, 0]])
    sz = HermitianOperator([[-1, 0], [0, 1]])
    return sx, sy, sz


def spin1_operators():
    """Spin-1 matrices in the ``Sz = {|+1>, |0>, |-1>}`` basis."""
    r = 1.0 / np.sqrt(2.0)
    sx = HermitianOperator([[0, r, 0], [r, 0, r], [0, r, 0]])
    sy = HermitianOperator([[0, -1j * r, 0], [1j * r, 0, -1j * r], [0, 1j * r, 0]])
    sz = HermitianOperator(np.diag([1.0, 0.0, -1.0]))
    return sx, sy, sz


def tensor_product(a, b):
    """Kronecker product; Hermitian inputs give a :class:`HermitianOperator`."""
    out = np.kron(_as_matrix(a), _as_matrix(b))
    if isinstance(a, HermitianOperator) and isinstance(b, HermitianOperator):
        return HermitianOperator(out)
    return out


def commutator(a, b):
    a, b = _as_matrix(a), _as_matrix(b)
    return a @ b - b @ a


def eigendecompose_hermitian(h, max_sweeps=100, rel_tol=1e-14):
    """Diagonalise a Hermitian matrix with cyclic complex Jacobi rotations.

    Parameters
    ----------
    h : HermitianOperator or array_like
    max_sweeps : int
        Sweep cap; exceeding it raises :class:`EigensolverError`.
    rel_tol : float
        Convergence threshold on the off-diagonal Frobenius norm, relative
        to the Frobenius norm of ``h``.

    Returns
    -------
    eigenvalues : ndarray, ascending
    eigenvectors : ndarray, orthonormal columns
    """
    a = np.array(_as_matrix(h), dtype=complex)
    n = a.shape[0]
    if a.ndim != 2 or n != a.shape[1]:
        raise ValueError("expected a square matrix")
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    tol = rel_tol * scale
    if n == 1 or scale == 0.0:
        return np.real(np.diag(a)).copy(), v

    mask = ~np.eye(n, dtype=bool)

    def off_norm(m):
        return np.linalg.norm(m[mask])

    for _ in range(max_sweeps):
        if off_norm(a) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                b = abs(apq)
                if b <= 1e-300:
                    continue
                phase = apq / b
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * b)
                if abs(theta) > 1e150:
                    t = 0.5 / abs(theta)  # theta^2 would overflow
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                v[:, idx] = v[:, idx] @ rot
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    else:
        if off_norm(a) > tol:
            raise EigensolverError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {off_norm(a):.3e}, threshold {tol:.3e})"
            )
    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def unitary_propagator(h, t):
    """``exp(-i H t)`` through the Jacobi eigensystem."""
    w, v = eigendecompose_hermitian(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T
