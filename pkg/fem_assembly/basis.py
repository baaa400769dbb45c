from functools import lru_cache

import numpy as np

from mesh_builder.dofs import SUPPORTED_DEGREES, UnsupportedDegreeError


def reference_nodes(degree: int) -> np.ndarray:
    """Узлы на опорном треугольнике в локальном порядке DofMap."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    nodes = [verts]
    if degree == 2:
        nodes.append(0.5 * (verts[[0, 1, 2]] + verts[[1, 2, 0]]))
    elif degree == 3:
        edge_nodes = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            edge_nodes.append((2.0 * verts[a] + verts[b]) / 3.0)
            edge_nodes.append((verts[a] + 2.0 * verts[b]) / 3.0)
        nodes.append(np.array(edge_nodes))
        nodes.append(np.array([[1.0 / 3.0, 1.0 / 3.0]]))
    return np.vstack(nodes)


class LagrangeBasis:
    """Узловой базис Лагранжа через обращение матрицы Вандермонда мономов."""

    def __init__(self, degree: int):
        if degree not in SUPPORTED_DEGREES:
            raise UnsupportedDegreeError(f"Lagrange degree {degree} is not supported (use 1, 2 or 3)")
        self.degree = degree
        self.nodes = reference_nodes(degree)
        self.exponents = np.array([(total - b, b) for total in range(degree + 1) for b in range(total + 1)])
        vandermonde = self._monomials(self.nodes)
        self.coefficients = np.linalg.inv(vandermonde)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def _monomials(self, points: np.ndarray) -> np.ndarray:
        x = points[:, 0:1]
        y = points[:, 1:2]
        return x ** self.exponents[:, 0] * y ** self.exponents[:, 1]

    def values(self, points: np.ndarray) -> np.ndarray:
        """(nq, nloc)"""
        return self._monomials(np.atleast_2d(points)) @ self.coefficients

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """(nq, nloc, 2) градиенты по опорным координатам."""
        points = np.atleast_2d(points)
        x = points[:, 0:1]
        y = points[:, 1:2]
        a = self.exponents[:, 0]
        b = self.exponents[:, 1]
        dx = a * x ** np.maximum(a - 1, 0) * y ** b
        dy = b * x ** a * y ** np.maximum(b - 1, 0)
        return np.stack([dx @ self.coefficients, dy @ self.coefficients], axis=2)


@lru_cache(maxsize=None)
def lagrange_basis(degree: int) -> LagrangeBasis:
    return LagrangeBasis(degree)
