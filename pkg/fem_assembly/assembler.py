import logging
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from fem_assembly.basis import lagrange_basis
from fem_assembly.quadrature import subdivided_rule, triangle_rule
from fem_assembly.spaces import MixedSpace
from mesh_builder.dofs import DofMap
from sparse_ops.operations import as_csr

# Разбиение опорного треугольника для интеграла |phi|: нули базисных
# функций степени <= 3 лежат на рёбрах этого разбиения
ABS_SUBDIVISIONS = 6


class MatrixKind(str, Enum):
    MASS_VELOCITY = "mass_velocity"
    MASS_PRESSURE = "mass_pressure"
    STRAIN_STIFFNESS = "strain_stiffness"
    VECTOR_LAPLACIAN = "vector_laplacian"
    GRAD_DIV = "grad_div"
    DIVERGENCE = "divergence"
    PRESSURE_LAPLACIAN = "pressure_laplacian"


VELOCITY_KINDS = {
    MatrixKind.MASS_VELOCITY,
    MatrixKind.STRAIN_STIFFNESS,
    MatrixKind.VECTOR_LAPLACIAN,
    MatrixKind.GRAD_DIV,
}


def _tabulate(space: MixedSpace, dofmap: DofMap, points: np.ndarray):
    basis = lagrange_basis(dofmap.degree)
    phi = basis.values(points)
    grads = space.geometry.physical_gradients(basis.gradients(points))
    return phi, grads


def _weights(space: MixedSpace, weights: np.ndarray) -> np.ndarray:
    return weights[None, :] * np.abs(space.geometry.determinants)[:, None]


def _scatter_scalar(local: np.ndarray, row_nodes: np.ndarray, col_nodes: np.ndarray, shape) -> sp.csr_matrix:
    rows = np.broadcast_to(row_nodes[:, :, None], local.shape)
    cols = np.broadcast_to(col_nodes[:, None, :], local.shape)
    return as_csr(sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=shape))


def _scatter_vector(local: np.ndarray, nodes: np.ndarray, n_velocity: int) -> sp.csr_matrix:
    """local: (T, nl, 2, nl, 2) -> глобальная матрица по dof = 2*node + c."""
    comp = np.arange(2)
    rows = 2 * nodes[:, :, None, None, None] + comp[None, None, :, None, None]
    cols = 2 * nodes[:, None, None, :, None] + comp[None, None, None, None, :]
    rows = np.broadcast_to(rows, local.shape)
    cols = np.broadcast_to(cols, local.shape)
    return as_csr(sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n_velocity, n_velocity)))


def _componentwise(scalar_local: np.ndarray) -> np.ndarray:
    eye = np.eye(2)
    return np.einsum("tij,cd->ticjd", scalar_local, eye)


def assemble(kind: MatrixKind, space: MixedSpace) -> sp.csr_matrix:
    """Глобальная разреженная матрица заданного типа (без граничных условий)."""
    kind = MatrixKind(kind)
    rule = triangle_rule(space.quadrature_degree)
    wdet = _weights(space, rule.weights)
    vdofs, pdofs = space.velocity_dofs, space.pressure_dofs

    if kind in VELOCITY_KINDS:
        phi, grads = _tabulate(space, vdofs, rule.points)
        if kind == MatrixKind.MASS_VELOCITY:
            local = _componentwise(np.einsum("tq,qi,qj->tij", wdet, phi, phi))
        elif kind == MatrixKind.VECTOR_LAPLACIAN:
            local = _componentwise(np.einsum("tq,tqia,tqja->tij", wdet, grads, grads))
        elif kind == MatrixKind.GRAD_DIV:
            local = np.einsum("tq,tqic,tqjd->ticjd", wdet, grads, grads)
        else:
            stiffness = np.einsum("tq,tqia,tqja->tij", wdet, grads, grads)
            local = _componentwise(stiffness) + np.einsum("tq,tqid,tqjc->ticjd", wdet, grads, grads)
        return _scatter_vector(local, vdofs.cell_to_nodes, space.n_velocity)

    if kind == MatrixKind.DIVERGENCE:
        psi, _ = _tabulate(space, pdofs, rule.points)
        _, grads = _tabulate(space, vdofs, rule.points)
        local = np.einsum("tq,qk,tqjd->tkjd", wdet, psi, grads)
        nl_p = pdofs.nodes_per_cell
        rows = np.broadcast_to(pdofs.cell_to_nodes[:, :, None, None], local.shape)
        cols = 2 * vdofs.cell_to_nodes[:, None, :, None] + np.arange(2)[None, None, None, :]
        cols = np.broadcast_to(cols, local.shape)
        logging.debug(f"Divergence assembly: {space.mesh.n_triangles} cells, {nl_p} pressure nodes per cell")
        return as_csr(sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                                    shape=(space.n_pressure, space.n_velocity)))

    psi, grads = _tabulate(space, pdofs, rule.points)
    nodes = pdofs.cell_to_nodes
    shape = (space.n_pressure, space.n_pressure)
    if kind == MatrixKind.MASS_PRESSURE:
        return _scatter_scalar(np.einsum("tq,qi,qj->tij", wdet, psi, psi), nodes, nodes, shape)
    return _scatter_scalar(np.einsum("tq,tqia,tqja->tij", wdet, grads, grads), nodes, nodes, shape)


def assemble_velocity_system(space: MixedSpace, tau: float, mu: float, form: str = "strain",
                             allow_zero_viscosity: bool = False) -> sp.csr_matrix:
    """
    A = tau^{-1} M_V + mu E_V (form="strain") либо tau^{-1} M_V + mu (L_V + D) (form="laplacian").
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if mu < 0 or (mu == 0 and not allow_zero_viscosity):
        raise ValueError(f"mu must be positive, got {mu!r}")
    mass = assemble(MatrixKind.MASS_VELOCITY, space)
    if form == "strain":
        viscous = assemble(MatrixKind.STRAIN_STIFFNESS, space)
    elif form == "laplacian":
        viscous = assemble(MatrixKind.VECTOR_LAPLACIAN, space) + assemble(MatrixKind.GRAD_DIV, space)
    else:
        raise ValueError(f"Unknown viscous form {form!r}")
    return as_csr(mass / tau + mu * viscous)


def lump_velocity_mass(space: MixedSpace) -> sp.csr_matrix:
    """Диагональная матрица Lambda_V: Lambda_ii = int |phi_i| (по каждой компоненте)."""
    vdofs = space.velocity_dofs
    rule = subdivided_rule(vdofs.degree, ABS_SUBDIVISIONS)
    phi = lagrange_basis(vdofs.degree).values(rule.points)
    reference = rule.weights @ np.abs(phi)
    per_cell = np.abs(space.geometry.determinants)[:, None] * reference[None, :]
    nodal = np.bincount(vdofs.cell_to_nodes.ravel(), weights=per_cell.ravel(), minlength=vdofs.n_nodes)
    return sp.diags(np.repeat(nodal, 2)).tocsr()


def assemble_load(space: MixedSpace, f: Callable, tau: Optional[float] = None,
                  mu: Optional[float] = None) -> np.ndarray:
    """
    Вектор F_(i,c) = int f_c phi_i. f(x, y) возвращает две компоненты;
    если заданы tau и mu, вызывается f(x, y, tau, mu).
    """
    rule = triangle_rule(space.quadrature_degree)
    wdet = _weights(space, rule.weights)
    vdofs = space.velocity_dofs
    phi = lagrange_basis(vdofs.degree).values(rule.points)
    pts = space.geometry.map_points(rule.points)
    x, y = pts[..., 0], pts[..., 1]
    if tau is not None and mu is not None:
        raw = f(x, y, tau, mu)
    else:
        raw = f(x, y)
    values = np.stack([np.broadcast_to(np.asarray(comp, dtype=float), x.shape) for comp in raw])
    local = np.einsum("tq,qi,ctq->tic", wdet, phi, values)
    index = 2 * vdofs.cell_to_nodes[:, :, None] + np.arange(2)[None, None, :]
    return np.bincount(index.ravel(), weights=local.ravel(), minlength=space.n_velocity)
