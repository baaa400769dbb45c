from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True, eq=False)
class TriangleRule:
    """Квадратура на опорном треугольнике (0,0),(1,0),(0,1); сумма весов = 1/2."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """
    Коническое произведение: Гаусс-Якоби (alpha=1) по u, Гаусс-Лежандр по v,
    x = u, y = (1-u) v. Точна для полиномов степени <= degree.
    """
    if degree < 0:
        raise ValueError(f"Quadrature degree must be non-negative, got {degree}")
    n = max(1, (degree + 2) // 2)
    t, wt = roots_jacobi(n, 1.0, 0.0)
    s, ws = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (1.0 + t)
    v = 0.5 * (1.0 + s)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    points = np.column_stack([uu.ravel(), ((1.0 - uu) * vv).ravel()])
    weights = np.outer(wt / 4.0, ws / 2.0).ravel()
    return TriangleRule(points=points, weights=weights, degree=degree)


@lru_cache(maxsize=None)
def subdivided_rule(degree: int, parts: int) -> TriangleRule:
    """Составное правило на равномерном разбиении опорного треугольника на parts^2 частей."""
    base = triangle_rule(degree)
    corners = []
    for i in range(parts):
        for j in range(parts - i):
            corners.append([(i, j), (i + 1, j), (i, j + 1)])
            if i + j <= parts - 2:
                corners.append([(i + 1, j), (i + 1, j + 1), (i, j + 1)])
    corners = np.array(corners, dtype=float) / parts
    a = corners[:, 0]
    e1 = corners[:, 1] - a
    e2 = corners[:, 2] - a
    pts = (a[:, None, :]
           + base.points[None, :, 0:1] * e1[:, None, :]
           + base.points[None, :, 1:2] * e2[:, None, :])
    weights = np.tile(base.weights / parts ** 2, len(corners))
    return TriangleRule(points=pts.reshape(-1, 2), weights=weights, degree=degree)
