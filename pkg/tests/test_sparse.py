import numpy as np
import pytest
import scipy.sparse as sp

from sparse_ops.operations import (
    DENSE_ORACLE_LIMIT,
    AsymmetricMatrixError,
    DimensionMismatchError,
    OracleSizeError,
    SingularMatrixError,
    as_csr,
    dense_eigs_sym,
    dense_generalized_eigs,
    dense_pinv,
    dense_solve,
    densify,
    dump_matrix_coo,
    sparsify,
    spmv,
    spmv_transpose,
)


def test_spmv_identity_and_zero():
    np.testing.assert_array_equal(spmv(sp.identity(3, format="csr"), np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(spmv(sp.csr_matrix((4, 3)), np.array([5.0, -1.0, 2.0])), np.zeros(4))


def test_spmv_matches_dense(rng):
    matrix = sp.random(5, 5, density=0.5, random_state=3, format="csr")
    x = rng.standard_normal(5)
    np.testing.assert_allclose(spmv(matrix, x), densify(matrix) @ x, rtol=1e-15, atol=1e-15)


def test_spmv_is_linear(rng):
    matrix = as_csr(sp.random(30, 30, density=0.2, random_state=4))
    x, y = rng.standard_normal(30), rng.standard_normal(30)
    alpha, beta = rng.standard_normal(2)
    lhs = spmv(matrix, alpha * x + beta * y)
    rhs = alpha * spmv(matrix, x) + beta * spmv(matrix, y)
    assert np.linalg.norm(lhs - rhs) <= 1e-14 * max(np.linalg.norm(lhs), 1.0)


def test_spmv_transpose(rng, small_system):
    system, _ = small_system
    b = system.divergence
    x = rng.standard_normal(b.shape[0])
    np.testing.assert_allclose(spmv_transpose(b, x), as_csr(b.T) @ x, rtol=1e-13, atol=1e-15)
    np.testing.assert_array_equal(spmv_transpose(b, np.zeros(b.shape[0])), np.zeros(b.shape[1]))

    symmetric = system.mass_pressure
    y = rng.standard_normal(symmetric.shape[0])
    np.testing.assert_allclose(spmv_transpose(symmetric, y), spmv(symmetric, y), rtol=1e-13, atol=1e-15)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        spmv(sp.identity(3, format="csr"), np.ones(4))
    with pytest.raises(DimensionMismatchError):
        spmv_transpose(sp.csr_matrix((2, 3)), np.ones(3))


def test_csr_invariants():
    coo = sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [2, 2, 0])), shape=(2, 3))
    m = as_csr(coo)
    assert m.nnz == 2
    assert m[0, 2] == 3.0
    assert np.all(np.diff(m.indptr) >= 0) and m.indptr[-1] == m.nnz
    assert m.has_sorted_indices
    with pytest.raises(ValueError):
        as_csr(np.array([[1.0, np.nan]]))


def test_densify_sparsify_round_trip():
    dense = np.array([[0.0, 1.5, 0.0], [2.0, 0.0, -3.25], [0.0, 0.0, 4.0]])
    np.testing.assert_array_equal(densify(sparsify(dense)), dense)


def test_dense_oracles():
    b = np.array([1.0, -2.0, 3.5])
    np.testing.assert_allclose(dense_solve(np.eye(3), b), b)
    np.testing.assert_allclose(dense_eigs_sym(np.diag([3.0, 1.0, 2.0])), [1.0, 2.0, 3.0])
    u = np.array([1.0, 2.0, 2.0]) / 3.0
    projector = np.outer(u, u)
    np.testing.assert_allclose(dense_pinv(projector), projector, atol=1e-14)
    np.testing.assert_allclose(dense_generalized_eigs(np.diag([2.0, 6.0]), np.diag([2.0, 3.0])), [1.0, 2.0])


def test_dense_oracle_errors():
    with pytest.raises(SingularMatrixError):
        dense_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
    with pytest.raises(AsymmetricMatrixError):
        dense_eigs_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DimensionMismatchError):
        dense_solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(OracleSizeError):
        densify(sp.identity(DENSE_ORACLE_LIMIT + 1, format="csr"))


def test_dump_matrix_coo(tmp_path):
    matrix = sp.csr_matrix(np.array([[1.0, 0.0], [0.1, -2.0]]))
    path = tmp_path / "matrix.coo"
    dump_matrix_coo(matrix, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["0 0 1.0", "1 0 0.1", "1 1 -2.0"]
