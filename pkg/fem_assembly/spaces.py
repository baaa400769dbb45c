from dataclasses import dataclass
from functools import cached_property

import numpy as np

from mesh_builder.dofs import DofMap, lagrange_dof_layout
from mesh_builder.mesh import Mesh


@dataclass(frozen=True, eq=False)
class CellGeometry:
    """Аффинные отображения опорного треугольника на ячейки."""

    origins: np.ndarray
    jacobians: np.ndarray
    inverse_jacobians: np.ndarray
    determinants: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "CellGeometry":
        p = mesh.vertices[mesh.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1] / det
        inv[:, 0, 1] = -jac[:, 0, 1] / det
        inv[:, 1, 0] = -jac[:, 1, 0] / det
        inv[:, 1, 1] = jac[:, 0, 0] / det
        return cls(origins=p[:, 0], jacobians=jac, inverse_jacobians=inv, determinants=det)

    def map_points(self, ref_points: np.ndarray) -> np.ndarray:
        """(T, nq, 2) физические координаты точек опорного треугольника."""
        return self.origins[:, None, :] + np.einsum("tab,qb->tqa", self.jacobians, ref_points)

    def physical_gradients(self, ref_gradients: np.ndarray) -> np.ndarray:
        """J^{-T} grad: (nq, nloc, 2) -> (T, nq, nloc, 2)."""
        return np.einsum("tba,qib->tqia", self.inverse_jacobians, ref_gradients)


@dataclass(frozen=True, eq=False)
class MixedSpace:
    """
    Пара Тейлора-Худа P(k+1)/P(k) на сетке.
    Скорость хранится чередованием компонент: dof = 2*node + c.
    """

    mesh: Mesh
    velocity_degree: int
    pressure_degree: int
    velocity_dofs: DofMap
    pressure_dofs: DofMap

    @classmethod
    def taylor_hood(cls, mesh: Mesh, pressure_degree: int = 1) -> "MixedSpace":
        velocity_degree = pressure_degree + 1
        return cls(
            mesh=mesh,
            velocity_degree=velocity_degree,
            pressure_degree=pressure_degree,
            velocity_dofs=lagrange_dof_layout(mesh, velocity_degree),
            pressure_dofs=lagrange_dof_layout(mesh, pressure_degree),
        )

    @cached_property
    def geometry(self) -> CellGeometry:
        return CellGeometry.from_mesh(self.mesh)

    @property
    def n_velocity(self) -> int:
        return 2 * self.velocity_dofs.n_nodes

    @property
    def n_pressure(self) -> int:
        return self.pressure_dofs.n_nodes

    @property
    def n_dofs(self) -> int:
        return self.n_velocity + self.n_pressure

    @property
    def quadrature_degree(self) -> int:
        return 2 * self.velocity_degree + 2

    def dirichlet_velocity_dofs(self) -> np.ndarray:
        nodes = self.velocity_dofs.dirichlet_nodes
        return (2 * nodes[:, None] + np.arange(2)).ravel()
