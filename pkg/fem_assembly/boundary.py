from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from fem_assembly.spaces import MixedSpace
from sparse_ops.operations import DimensionMismatchError, as_csr


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Закреплённые степени свободы скорости и их значения."""

    constrained_dofs: np.ndarray
    values: np.ndarray

    def full_vector(self, n: int) -> np.ndarray:
        g = np.zeros(n)
        g[self.constrained_dofs] = self.values
        return g

    def free_mask(self, n: int) -> np.ndarray:
        free = np.ones(n)
        free[self.constrained_dofs] = 0.0
        return free


def interpolate(field: Callable, dofmap) -> np.ndarray:
    """
    Узловая интерполяция. Векторное поле (две компоненты) возвращается
    чередованием компонент, скалярное - как есть.
    """
    x, y = dofmap.node_coords[:, 0], dofmap.node_coords[:, 1]
    raw = field(x, y)
    if isinstance(raw, (tuple, list)) or np.ndim(raw) == 2:
        comps = [np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in raw]
        return np.column_stack(comps).ravel()
    return np.broadcast_to(np.asarray(raw, dtype=float), x.shape).copy()


def dirichlet_condition(space: MixedSpace, g: Optional[Callable] = None) -> BoundaryCondition:
    """Условие Дирихле на узлах рёбер с меткой Дирихле; g=None - однородное."""
    dofs = space.dirichlet_velocity_dofs()
    if g is None:
        values = np.zeros(len(dofs))
    else:
        nodes = space.velocity_dofs.dirichlet_nodes
        x, y = space.velocity_dofs.node_coords[nodes, 0], space.velocity_dofs.node_coords[nodes, 1]
        gx, gy = g(x, y)
        values = np.column_stack([np.broadcast_to(gx, x.shape), np.broadcast_to(gy, x.shape)]).ravel()
    return BoundaryCondition(constrained_dofs=dofs, values=values.astype(float))


def apply_dirichlet(matrix, rhs: Optional[np.ndarray], bc: BoundaryCondition) -> Tuple[sp.csr_matrix, Optional[np.ndarray]]:
    """
    Симметричное исключение: A_mod = P A P + diag(c), P = diag(free),
    rhs_mod = rhs - A g, rhs_mod[c] = g.
    """
    a = as_csr(matrix)
    n = a.shape[0]
    free = bc.free_mask(n)
    projector = sp.diags(free)
    a_mod = as_csr(projector @ a @ projector + sp.diags(1.0 - free))
    a_mod.eliminate_zeros()
    if rhs is None:
        return a_mod, None
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != n:
        raise DimensionMismatchError(f"Right-hand side of length {rhs.shape[0]} for matrix of size {n}")
    rhs_mod = rhs - a @ bc.full_vector(n)
    rhs_mod[bc.constrained_dofs] = bc.values
    return a_mod, rhs_mod


def apply_dirichlet_divergence(divergence, bc: BoundaryCondition) -> Tuple[sp.csr_matrix, np.ndarray]:
    """B_mod = B diag(free), G = -B g (до проекции на нулевое среднее)."""
    b = as_csr(divergence)
    n = b.shape[1]
    g = -(b @ bc.full_vector(n))
    b_mod = as_csr(b @ sp.diags(bc.free_mask(n)))
    b_mod.eliminate_zeros()
    return b_mod, g
