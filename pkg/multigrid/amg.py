import logging
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
import scipy.sparse as sp
from pyamg.aggregation.aggregate import standard_aggregation
from scipy.sparse.linalg import LinearOperator

from krylov.operators import make_operator
from sparse_ops.operations import as_csr, dense_pinv

DEFAULT_COARSE_SIZE = 64
DEFAULT_MAX_LEVELS = 10
POWER_ITERATIONS = 10
CHEBYSHEV_DEGREE = 2
# Интервал сглаживания Чебышёва: [upper / 30, upper]
CHEBYSHEV_LOWER_FRACTION = 1.0 / 30.0
SPECTRAL_SAFETY = 1.25


class AmgConvergenceError(RuntimeError):
    def __init__(self, last_residual: float, cycles: int):
        self.last_residual = last_residual
        self.cycles = cycles
        super().__init__(f"AMG did not reach the threshold in {cycles} cycles (relative residual {last_residual:.3e})")


@dataclass(frozen=True)
class ToThreshold:
    """V-циклы до относительной невязки rel_tol (не более max_cycles)."""

    rel_tol: float = 1e-10
    max_cycles: int = 200

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol!r}")

    @property
    def label(self) -> str:
        return "th"


@dataclass(frozen=True)
class FixedVCycles:
    """Ровно count V-циклов от нулевого приближения (линейный оператор)."""

    count: int = 2

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count!r}")

    @property
    def label(self) -> str:
        return f"{self.count}vc"


AmgMode = Union[ToThreshold, FixedVCycles]


def parse_mode(token: str) -> AmgMode:
    """'th' -> ToThreshold(), '2vc' -> FixedVCycles(2)."""
    token = token.strip().lower()
    if token == "th":
        return ToThreshold()
    if token.endswith("vc") and token[:-2].isdigit():
        return FixedVCycles(int(token[:-2]))
    raise ValueError(f"Unknown AMG mode {token!r} (expected 'th' or '<k>vc')")


@dataclass(eq=False)
class AmgLevel:
    matrix: sp.csr_matrix
    inv_diagonal: np.ndarray
    upper_bound: float
    prolongation: sp.csr_matrix = None
    restriction: sp.csr_matrix = None


@dataclass(eq=False)
class AmgHierarchy:
    levels: List[AmgLevel]
    coarse_inverse: np.ndarray
    strong_threshold: float
    block_size: int
    chebyshev_degree: int = CHEBYSHEV_DEGREE

    @property
    def n(self) -> int:
        return self.levels[0].matrix.shape[0]

    @property
    def matrix(self) -> sp.csr_matrix:
        return self.levels[0].matrix

    def operator_complexity(self) -> float:
        return sum(lvl.matrix.nnz for lvl in self.levels) / self.levels[0].matrix.nnz

    def describe(self) -> str:
        sizes = " -> ".join(str(lvl.matrix.shape[0]) for lvl in self.levels)
        return f"levels: {sizes}; operator complexity {self.operator_complexity():.2f}"


def _inverse_diagonal(a: sp.csr_matrix) -> np.ndarray:
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise ValueError("AMG requires a positive diagonal")
    return 1.0 / diag


def _strength(a: sp.csr_matrix, theta: float, block_size: int) -> sp.csr_matrix:
    """
    Граф сильных связей: |a_ij| >= theta * max_k |a_ik| (k != i), объединённый с транспонированным.
    Для block_size=2 берутся нормы Фробениуса узловых блоков 2x2.
    """
    if block_size > 1:
        bsr = a.tobsr(blocksize=(block_size, block_size))
        norms = np.sqrt(np.sum(bsr.data ** 2, axis=(1, 2)))
        nodal = sp.csr_matrix((norms, bsr.indices, bsr.indptr), shape=(a.shape[0] // block_size,) * 2)
    else:
        nodal = abs(a).tocsr()
    nodal = as_csr(nodal)
    coo = nodal.tocoo()
    off = coo.row != coo.col
    rows, cols, vals = coo.row[off], coo.col[off], np.abs(coo.data[off])
    row_max = np.zeros(nodal.shape[0])
    np.maximum.at(row_max, rows, vals)
    strong = (vals > 0) & (vals >= theta * row_max[rows])
    graph = sp.csr_matrix((np.ones(strong.sum()), (rows[strong], cols[strong])), shape=nodal.shape)
    graph = as_csr(graph.maximum(graph.T))
    return graph


def _aggregate(graph: sp.csr_matrix) -> sp.csr_matrix:
    result = standard_aggregation(graph)
    agg = result[0] if isinstance(result, tuple) else result
    return sp.csr_matrix(agg)


def _tentative(aggregates: sp.csr_matrix, block_size: int) -> sp.csr_matrix:
    """Нормированные индикаторы агрегатов, покомпонентно при block_size > 1."""
    coo = aggregates.tocoo()
    sizes = np.bincount(coo.col, minlength=aggregates.shape[1]).astype(float)
    values = 1.0 / np.sqrt(sizes[coo.col])
    n_nodes, n_agg = aggregates.shape
    rows = (block_size * coo.row[:, None] + np.arange(block_size)).ravel()
    cols = (block_size * coo.col[:, None] + np.arange(block_size)).ravel()
    vals = np.repeat(values, block_size)
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(n_nodes * block_size, n_agg * block_size)))


def _spectral_upper_bound(a: sp.csr_matrix, inv_diag: np.ndarray) -> float:
    """
    Оценка rho(D^{-1} A): степенной метод (отношение Рэлея на симметризованном
    операторе D^{-1/2} A D^{-1/2}), ограниченная сверху кругами Гершгорина.
    """
    scale = np.sqrt(inv_diag)
    x = np.random.default_rng(0).uniform(-1.0, 1.0, a.shape[0])
    rayleigh = 0.0
    for _ in range(POWER_ITERATIONS):
        x /= np.linalg.norm(x)
        y = scale * (a @ (scale * x))
        rayleigh = float(x @ y)
        x = y
    gershgorin = float(np.max(inv_diag * np.asarray(abs(a).sum(axis=1)).ravel()))
    return min(SPECTRAL_SAFETY * rayleigh, gershgorin)


def _make_level(a: sp.csr_matrix) -> AmgLevel:
    inv_diag = _inverse_diagonal(a)
    return AmgLevel(matrix=a, inv_diagonal=inv_diag, upper_bound=_spectral_upper_bound(a, inv_diag))


def amg_setup(matrix, strong_threshold: float = 0.1, block_size: int = 1, max_levels: int = DEFAULT_MAX_LEVELS,
              coarse_size: int = DEFAULT_COARSE_SIZE, chebyshev_degree: int = CHEBYSHEV_DEGREE) -> AmgHierarchy:
    """
    Иерархия сглаженной агрегации для симметричной матрицы с положительной диагональю.
    Грубейший уровень решается плотной псевдообратной (допускает вырожденный L_Q).
    """
    a = as_csr(matrix)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"AMG requires a square matrix, got {a.shape}")
    if a.shape[0] % block_size:
        raise ValueError(f"Matrix size {a.shape[0]} is not divisible by block size {block_size}")
    if not 0.0 <= strong_threshold < 1.0:
        raise ValueError(f"strong_threshold must lie in [0, 1), got {strong_threshold!r}")

    levels = []
    while a.shape[0] > coarse_size and len(levels) + 1 < max_levels:
        level = _make_level(a)
        aggregates = _aggregate(_strength(a, strong_threshold, block_size))
        if aggregates.nnz == 0 or aggregates.shape[1] * block_size >= a.shape[0]:
            logging.warning(f"AMG coarsening stalled at size {a.shape[0]}")
            break
        tentative = _tentative(aggregates, block_size)
        omega = (4.0 / 3.0) / level.upper_bound
        prolongation = as_csr(tentative - omega * sp.diags(level.inv_diagonal) @ (a @ tentative))
        restriction = as_csr(prolongation.T)
        level.prolongation = prolongation
        level.restriction = restriction
        levels.append(level)
        a = as_csr(restriction @ a @ prolongation)

    coarse = AmgLevel(matrix=a, inv_diagonal=np.ones(a.shape[0]), upper_bound=1.0)
    levels.append(coarse)
    hierarchy = AmgHierarchy(levels=levels, coarse_inverse=dense_pinv(a), strong_threshold=strong_threshold,
                             block_size=block_size, chebyshev_degree=chebyshev_degree)
    logging.debug(f"AMG setup (theta={strong_threshold}, block={block_size}): {hierarchy.describe()}")
    return hierarchy


def _chebyshev(level: AmgLevel, x: np.ndarray, b: np.ndarray, degree: int) -> np.ndarray:
    """Полиномиальное сглаживание Чебышёва для D^{-1} A на [upper/30, upper]."""
    upper = level.upper_bound
    lower = CHEBYSHEV_LOWER_FRACTION * upper
    theta = 0.5 * (upper + lower)
    delta = 0.5 * (upper - lower)
    sigma = theta / delta
    rho = 1.0 / sigma
    a = level.matrix
    d = level.inv_diagonal * (b - a @ x) / theta
    x = x + d
    for _ in range(degree - 1):
        rho_new = 1.0 / (2.0 * sigma - rho)
        residual = level.inv_diagonal * (b - a @ x)
        d = rho_new * rho * d + (2.0 * rho_new / delta) * residual
        rho = rho_new
        x = x + d
    return x


def _vcycle(hierarchy: AmgHierarchy, index: int, b: np.ndarray) -> np.ndarray:
    if index == len(hierarchy.levels) - 1:
        return hierarchy.coarse_inverse @ b
    level = hierarchy.levels[index]
    x = _chebyshev(level, np.zeros_like(b), b, hierarchy.chebyshev_degree)
    residual = b - level.matrix @ x
    x = x + level.prolongation @ _vcycle(hierarchy, index + 1, level.restriction @ residual)
    return _chebyshev(level, x, b, hierarchy.chebyshev_degree)


def amg_apply(hierarchy: AmgHierarchy, rhs: np.ndarray, mode: AmgMode) -> Tuple[np.ndarray, int, float]:
    """
    Приближённо решает A x = rhs. Возвращает (x, число циклов, относительная невязка).
    ToThreshold без сходимости за max_cycles -> AmgConvergenceError.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != hierarchy.n:
        raise ValueError(f"Right-hand side of length {rhs.shape[0]} for AMG of size {hierarchy.n}")
    x = np.zeros_like(rhs)
    norm_b = np.linalg.norm(rhs)
    if norm_b == 0.0:
        return x, 0, 0.0

    a = hierarchy.matrix
    residual = rhs
    cycles = 0
    rel = 1.0
    if isinstance(mode, FixedVCycles):
        for _ in range(mode.count):
            x = x + _vcycle(hierarchy, 0, residual)
            residual = rhs - a @ x
            cycles += 1
        rel = np.linalg.norm(residual) / norm_b
    else:
        while rel > mode.rel_tol:
            if cycles >= mode.max_cycles:
                raise AmgConvergenceError(rel, cycles)
            x = x + _vcycle(hierarchy, 0, residual)
            residual = rhs - a @ x
            cycles += 1
            rel = np.linalg.norm(residual) / norm_b
    return x, cycles, float(rel)


def amg_operator(hierarchy: AmgHierarchy, mode: AmgMode, name: str = "amg") -> LinearOperator:
    """Приближённая обратная как оператор; fixed только для FixedVCycles."""
    def apply(v):
        return amg_apply(hierarchy, v, mode)[0]

    return make_operator(hierarchy.n, apply, symmetric=True, fixed=isinstance(mode, FixedVCycles),
                         name=f"{name}[{mode.label}]")
