import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from stueckelberg.quantum import (
    DensityMatrix,
    HermitianOperator,
    check_density_matrices,
    commutator,
    eigendecompose_hermitian,
    pauli_matrices,
    spin1_operators,
    tensor_product,
    unitary_propagator,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def test_rejects_non_hermitian():
    with pytest.raises(ValueError, match="not Hermitian"):
        HermitianOperator([[0, 1], [0, 0]])


def test_rejects_non_square():
    with pytest.raises(ValueError, match="square"):
        HermitianOperator(np.zeros((2, 3)))


def test_operator_is_immutable():
    h = HermitianOperator(np.eye(2))
    with pytest.raises(ValueError):
        h.matrix[0, 0] = 5


def test_complex_scaling_refused():
    with pytest.raises(TypeError):
        HermitianOperator(np.eye(2)) * 1j


@pytest.mark.parametrize(
    "matrix, message",
    [
        (np.diag([0.6, 0.6]), "trace"),
        (np.diag([1.2, -0.2]), "negative eigenvalue"),
        (np.array([[0.5, 0.5], [0.1, 0.5]]), "Hermitian"),
    ],
)
def test_density_matrix_validation(matrix, message):
    with pytest.raises(ValueError, match=message):
        DensityMatrix(matrix)


def test_pure_state_normalised():
    rho = DensityMatrix.pure([3.0, 4.0j])
    assert rho.population(0) == pytest.approx(9 / 25)
    assert np.trace(rho.matrix @ rho.matrix).real == pytest.approx(1.0)


def test_pauli_algebra():
    sx, sy, sz = (p.matrix for p in pauli_matrices())
    assert np.allclose(commutator(sx, sy), 2j * sz)
    for p in (sx, sy, sz):
        assert np.allclose(p @ p, np.eye(2))


def test_spin1_algebra():
    sx, sy, sz = (s.matrix for s in spin1_operators())
    assert np.allclose(commutator(sx, sy), 1j * sz)
    assert np.allclose(sx @ sx + sy @ sy + sz @ sz, 2 * np.eye(3))  # S(S+1) = 2


def test_tensor_product_shape_and_value():
    sz = pauli_matrices()[2].matrix
    t = tensor_product(sz, np.eye(3))
    assert np.asarray(t).shape == (6, 6)
    assert np.allclose(np.asarray(t), np.kron(sz, np.eye(3)))


@pytest.mark.parametrize("n", [1, 2, 3, 6, 12])
def test_jacobi_matches_lapack(n):
    rng = np.random.default_rng(n)
    h = random_hermitian(rng, n)
    w, v = eigendecompose_hermitian(h)
    assert np.allclose(w, np.linalg.eigvalsh(h), atol=1e-12)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)
    assert np.allclose(h @ v, v * w, atol=1e-11)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (4,), elements=finite), arrays(float, (6,), elements=finite))
def test_jacobi_reconstructs(diag, off):
    h = np.diag(diag).astype(complex)
    iu = np.triu_indices(4, 1)
    h[iu] = off * (1 + 0.5j)
    h = h + np.triu(h, 1).conj().T
    w, v = eigendecompose_hermitian(h)
    assert np.all(np.diff(w) >= -1e-12)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-9 * max(1.0, np.abs(h).max()))


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 10_000))
def test_propagator_is_unitary(t, seed):
    h = random_hermitian(np.random.default_rng(seed), 3)
    u = unitary_propagator(h, t)
    assert np.allclose(u.conj().T @ u, np.eye(3), atol=1e-10)


def test_propagator_of_pauli_x():
    sx = pauli_matrices()[0].matrix
    u = unitary_propagator(0.5 * sx, np.pi)  # pi rotation
    assert np.allclose(np.abs(u), [[0, 1], [1, 0]], atol=1e-12)


def test_vectorised_check():
    good = np.array([np.diag([0.25, 0.75]), np.diag([1.0, 0.0])], dtype=complex)
    tr, herm, lo = check_density_matrices(good, 0, 0, 0)
    assert tr < 1e-15 and herm == 0 and lo == pytest.approx(0.0)
    bad = good.copy()
    bad[0, 0, 0] = -0.1
    assert check_density_matrices(bad, 0, 0, 0)[2] == pytest.approx(-0.1)
