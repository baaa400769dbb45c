from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator


def make_operator(n: int, matvec: Callable[[np.ndarray], np.ndarray], symmetric: bool = False,
                  fixed: bool = True, name: str = "") -> LinearOperator:
    """
    Квадратный оператор n x n. fixed=False означает, что действие может
    меняться между вызовами (внутренние решения до порога) - такой
    предобуславливатель допустим только в гибких методах.
    """
    op = LinearOperator((n, n), matvec=lambda x: np.asarray(matvec(np.asarray(x, dtype=float).ravel()), dtype=float),
                        dtype=float)
    op.symmetric = symmetric
    op.fixed = fixed
    op.name = name
    return op


def as_operator(obj, symmetric: bool = None, fixed: bool = True, name: str = "") -> LinearOperator:
    """Оборачивает матрицу/оператор; уже подготовленный оператор возвращается как есть."""
    if isinstance(obj, LinearOperator) and hasattr(obj, "fixed"):
        return obj
    if obj.shape[0] != obj.shape[1]:
        raise ValueError(f"Square operator expected, got shape {obj.shape}")
    if symmetric is None:
        symmetric = sp.issparse(obj) and abs(obj - obj.T).max() <= 1e-12 * max(abs(obj).max(), 1e-300)
    base = aslinearoperator(obj)
    return make_operator(obj.shape[0], base.matvec, symmetric=bool(symmetric), fixed=fixed, name=name)


def identity_operator(n: int) -> LinearOperator:
    return make_operator(n, lambda x: x.copy(), symmetric=True, fixed=True, name="identity")


def linearity_defect(op: LinearOperator, rng: np.random.Generator, probes: int = 3) -> float:
    """max ||op(a x + b y) - a op(x) - b op(y)|| / ||op(a x + b y)|| по случайным пробам."""
    n = op.shape[0]
    worst = 0.0
    for _ in range(probes):
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        a, b = rng.standard_normal(2)
        lhs = op.matvec(a * x + b * y)
        rhs = a * op.matvec(x) + b * op.matvec(y)
        worst = max(worst, np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300))
    return worst
