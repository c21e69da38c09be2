import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import close, random_hermitian, random_matrix
from qirt import linalg
from qirt.linalg import PAULI

seeds = st.integers(0, 2**32 - 1)
I2 = np.eye(2)
PHI = linalg.proj(linalg.max_entangled(2))


def test_tensor_identity():
    assert close(linalg.tensor(I2, I2), np.eye(4), 0)


def test_tensor_sigma_x_anti_diagonal():
    assert close(linalg.tensor(PAULI["X"], PAULI["X"]), np.fliplr(np.eye(4)), 0)


@given(seeds)
def test_tensor_trace_factorizes(seed):
    rng = np.random.default_rng(seed)
    a, b = random_matrix(rng, 2), random_matrix(rng, 3)
    assert abs(np.trace(linalg.tensor(a, b)) - np.trace(a) * np.trace(b)) < 1e-10


@given(seeds)
def test_tensor_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_matrix(rng, d) for d in (2, 3, 2))
    assert close(linalg.tensor(linalg.tensor(a, b), c), linalg.tensor(a, linalg.tensor(b, c)), 1e-12)


def test_partial_trace_product_state(rng):
    rho, sigma = random_hermitian(rng, 2), np.diag([0.3, 0.7])
    assert close(linalg.partial_trace(np.kron(rho, sigma), [2, 2], [0]), rho, 1e-12)


def test_partial_trace_bell_marginal():
    assert close(linalg.partial_trace(PHI, [2, 2], [0]), I2 / 2, 1e-15)


@given(seeds)
def test_partial_trace_preserves_trace(seed):
    m = random_matrix(np.random.default_rng(seed), 6)
    for keep in ([0], [1]):
        assert abs(np.trace(linalg.partial_trace(m, [2, 3], keep)) - np.trace(m)) < 1e-10


@given(seeds)
def test_partial_trace_of_product(seed):
    rng = np.random.default_rng(seed)
    a, b = random_matrix(rng, 3), random_matrix(rng, 2)
    assert close(linalg.partial_trace(np.kron(a, b), [3, 2], [0]), np.trace(b) * a, 1e-12)


def test_partial_trace_index_sum_oracle(rng):
    m = random_matrix(rng, 6)
    t = m.reshape(2, 3, 2, 3)
    assert close(linalg.partial_trace(m, [2, 3], [0]), np.einsum("ajbj->ab", t), 1e-13)
    assert close(linalg.partial_trace(m, [2, 3], [1]), np.einsum("iaib->ab", t), 1e-13)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(ValueError):
        linalg.partial_trace(np.eye(6), [2, 2], [0])


def test_partial_transpose_product(rng):
    rho, sigma = random_matrix(rng, 2), random_matrix(rng, 3)
    assert close(linalg.partial_transpose(np.kron(rho, sigma), [2, 3], 1), np.kron(rho, sigma.T), 1e-14)


def test_partial_transpose_bell_eigenvalue():
    vals = np.linalg.eigvalsh(linalg.partial_transpose(PHI, [2, 2], 1))
    assert abs(vals.min() + 0.5) < 1e-12


@given(seeds)
def test_partial_transpose_involution_and_hermiticity(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, 6)
    pt = linalg.partial_transpose(h, [3, 2], 0)
    assert linalg.is_hermitian(pt)
    assert close(linalg.partial_transpose(pt, [3, 2], 0), h, 0)


def test_permute_systems_convention(rng):
    a, b, c = random_matrix(rng, 2), random_matrix(rng, 3), random_matrix(rng, 4)
    m = linalg.kron_all(a, b, c)
    # factor perm[i] of the input lands in slot i
    assert close(linalg.permute_systems(m, [2, 3, 4], [2, 0, 1]), linalg.kron_all(c, a, b), 1e-13)


def test_eigs_sigma_z():
    vals, _ = linalg.hermitian_eigs(PAULI["Z"])
    assert close(vals, [1, -1], 1e-14)


def test_eigs_closed_form():
    vals, _ = linalg.hermitian_eigs(I2 / 2 + PAULI["X"] / 6)
    assert close(vals, [2 / 3, 1 / 3], 1e-14)


@given(seeds, st.integers(1, 8))
def test_eigs_reconstruct_orthonormal_trace(seed, n):
    h = random_hermitian(np.random.default_rng(seed), n)
    vals, vecs = linalg.hermitian_eigs(h)
    assert np.all(np.diff(vals) <= 0)
    assert np.linalg.norm(h - vecs @ np.diag(vals) @ vecs.conj().T) <= 1e-9 * np.linalg.norm(h)
    assert np.linalg.norm(vecs.conj().T @ vecs - np.eye(n)) <= 1e-9
    assert abs(vals.sum() - np.trace(h).real) < 1e-9


def test_eigs_rejects_non_hermitian():
    with pytest.raises(ValueError):
        linalg.hermitian_eigs(np.array([[0, 1], [0, 0]], dtype=complex))


def test_trace_norm_values(rng):
    assert abs(linalg.trace_norm(PAULI["Z"]) - 2) < 1e-14
    assert abs(linalg.trace_norm(PHI - np.eye(4) / 4) - 1.5) < 1e-12
    g = random_matrix(rng, 3)
    rho = g @ g.conj().T
    assert abs(linalg.trace_norm(rho / np.trace(rho)) - 1) < 1e-12


@given(seeds, st.floats(-3, 3))
def test_trace_norm_is_a_norm(seed, c):
    rng = np.random.default_rng(seed)
    a, b = random_matrix(rng, 3), random_matrix(rng, 3)
    assert linalg.trace_norm(a + b) <= linalg.trace_norm(a) + linalg.trace_norm(b) + 1e-10
    assert abs(linalg.trace_norm(c * a) - abs(c) * linalg.trace_norm(a)) <= 1e-10 * (1 + linalg.trace_norm(a))


def test_is_psd_examples():
    assert linalg.is_psd(np.eye(3))
    assert not linalg.is_psd(PAULI["Z"])
    assert linalg.is_psd(I2 / 2 + PAULI["X"] / 6)


def test_psd_project_and_support(rng):
    h = random_hermitian(rng, 4)
    p = linalg.psd_project(h)
    assert linalg.min_eig(p) >= -1e-12
    v = linalg.support_basis(linalg.proj(linalg.ket(1, 3)))
    assert v.shape == (3, 1)
