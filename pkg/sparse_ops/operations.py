import logging
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp

# Плотные "оракулы" используются только на маленьких задачах
DENSE_ORACLE_LIMIT = 2000
PIVOT_TOL = 1e-13
SYMMETRY_TOL = 1e-10


class DimensionMismatchError(ValueError):
    pass


class SingularMatrixError(ValueError):
    pass


class AsymmetricMatrixError(ValueError):
    pass


class OracleSizeError(ValueError):
    """Матрица слишком велика для плотного оракула."""


def as_csr(matrix) -> sp.csr_matrix:
    """
    Приводит матрицу к CSR с отсортированными индексами без дубликатов.
    NaN/Inf в значениях не допускаются.
    """
    m = sp.csr_matrix(matrix, dtype=float)
    m.sum_duplicates()
    m.sort_indices()
    if not np.all(np.isfinite(m.data)):
        raise ValueError("Matrix contains NaN or Inf entries")
    return m


def spmv(matrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if matrix.shape[1] != x.shape[0]:
        raise DimensionMismatchError(f"Cannot multiply {matrix.shape} matrix by vector of length {x.shape[0]}")
    return matrix @ x


def spmv_transpose(matrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if matrix.shape[0] != x.shape[0]:
        raise DimensionMismatchError(f"Cannot multiply transpose of {matrix.shape} matrix by vector of length {x.shape[0]}")
    return matrix.T @ x


def densify(matrix) -> np.ndarray:
    if matrix.shape[0] > DENSE_ORACLE_LIMIT or matrix.shape[1] > DENSE_ORACLE_LIMIT:
        raise OracleSizeError(f"Matrix {matrix.shape} is too large for a dense oracle (limit {DENSE_ORACLE_LIMIT})")
    if sp.issparse(matrix):
        return matrix.toarray()
    return np.array(matrix, dtype=float)


def sparsify(dense: np.ndarray) -> sp.csr_matrix:
    return as_csr(np.asarray(dense, dtype=float))


def _check_square(dense: np.ndarray):
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise DimensionMismatchError(f"Square matrix expected, got shape {dense.shape}")
    if dense.shape[0] > DENSE_ORACLE_LIMIT:
        raise OracleSizeError(f"Matrix of size {dense.shape[0]} exceeds dense oracle limit {DENSE_ORACLE_LIMIT}")


def _check_symmetric(dense: np.ndarray):
    scale = max(np.abs(dense).max(), np.finfo(float).tiny)
    defect = np.abs(dense - dense.T).max()
    if defect > SYMMETRY_TOL * scale:
        raise AsymmetricMatrixError(f"Matrix is not symmetric: max|M - M^T| = {defect:.3e}")


def dense_solve(matrix, rhs: np.ndarray) -> np.ndarray:
    """Плотное LU с выбором главного элемента; почти нулевой пивот -> SingularMatrixError."""
    dense = densify(matrix)
    _check_square(dense)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != dense.shape[0]:
        raise DimensionMismatchError(f"Right-hand side of length {rhs.shape[0]} for matrix {dense.shape}")
    lu, piv = scipy.linalg.lu_factor(dense, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= PIVOT_TOL * max(np.abs(dense).max(), np.finfo(float).tiny):
        raise SingularMatrixError(f"Matrix is numerically singular (min pivot {pivots.min():.3e})")
    return scipy.linalg.lu_solve((lu, piv), rhs)


def dense_eigs_sym(matrix) -> np.ndarray:
    """Собственные значения симметричной матрицы по возрастанию."""
    dense = densify(matrix)
    _check_square(dense)
    _check_symmetric(dense)
    return scipy.linalg.eigh(0.5 * (dense + dense.T), eigvals_only=True)


def dense_generalized_eigs(matrix, weight) -> np.ndarray:
    """Собственные значения пучка (M, N), N - симметричная положительно определённая."""
    dense = densify(matrix)
    w = densify(weight)
    _check_square(dense)
    _check_square(w)
    _check_symmetric(dense)
    _check_symmetric(w)
    return scipy.linalg.eigh(0.5 * (dense + dense.T), 0.5 * (w + w.T), eigvals_only=True)


def dense_pinv(matrix) -> np.ndarray:
    """Псевдообратная матрица (грубая сетка AMG, вырожденные операторы давления)."""
    dense = densify(matrix)
    _check_square(dense)
    return scipy.linalg.pinv(dense)


def dump_matrix_coo(matrix, path) -> None:
    """Текстовый дамп: строки 'i j value' с точностью, достаточной для обратного чтения."""
    coo = as_csr(matrix).tocoo()
    lines = [f"{i} {j} {v!r}" for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    logging.info(f"Matrix {coo.shape} with {coo.nnz} entries written to {path}")
