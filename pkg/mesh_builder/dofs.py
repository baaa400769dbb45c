from dataclasses import dataclass

import numpy as np

from mesh_builder.mesh import DIRICHLET_TAG, LOCAL_EDGES, Mesh

BOUNDARY_TOL = 1e-12
SUPPORTED_DEGREES = (1, 2, 3)


class UnsupportedDegreeError(ValueError):
    """Степень полиномов вне {1, 2, 3}."""


@dataclass(frozen=True, eq=False)
class DofMap:
    """
    Узлы скалярного лагранжева пространства степени degree.

    Локальный порядок узлов в ячейке: вершины v0,v1,v2, затем узлы рёбер
    e0,e1,e2 (по два для degree=3, от начала ребра к концу), затем внутренний узел.
    """

    degree: int
    node_coords: np.ndarray
    cell_to_nodes: np.ndarray
    boundary_nodes: np.ndarray
    dirichlet_nodes: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    @property
    def nodes_per_cell(self) -> int:
        return self.cell_to_nodes.shape[1]


def lagrange_dof_layout(mesh: Mesh, degree: int) -> DofMap:
    if degree not in SUPPORTED_DEGREES:
        raise UnsupportedDegreeError(f"Lagrange degree {degree} is not supported (use 1, 2 or 3)")

    nv = mesh.n_vertices
    verts = mesh.vertices
    tris = mesh.triangles
    edges = mesh.edges
    c2e = mesh.cell_to_edge
    dirichlet_pairs = mesh.boundary_edges[mesh.boundary_tags == DIRICHLET_TAG]
    dirichlet_edges = mesh.edge_index(dirichlet_pairs)
    dirichlet = [dirichlet_pairs.ravel()]

    if degree == 1:
        coords = verts.copy()
        cells = tris.copy()
    elif degree == 2:
        coords = np.vstack([verts, 0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]])])
        cells = np.hstack([tris, nv + c2e])
        dirichlet.append(nv + dirichlet_edges)
    else:
        ne = mesh.n_edges
        p0, p1 = verts[edges[:, 0]], verts[edges[:, 1]]
        # узел nv+2e - на трети от меньшей вершины, nv+2e+1 - на двух третях
        edge_nodes = np.stack([(2.0 * p0 + p1) / 3.0, (p0 + 2.0 * p1) / 3.0], axis=1).reshape(-1, 2)
        centroids = verts[tris].mean(axis=1)
        coords = np.vstack([verts, edge_nodes, centroids])

        starts = tris[:, LOCAL_EDGES[:, 0]]
        ends = tris[:, LOCAL_EDGES[:, 1]]
        forward = starts < ends
        first = nv + 2 * c2e + np.where(forward, 0, 1)
        second = nv + 2 * c2e + np.where(forward, 1, 0)
        edge_part = np.stack([first, second], axis=2).reshape(-1, 6)
        interior = nv + 2 * ne + np.arange(mesh.n_triangles)
        cells = np.hstack([tris, edge_part, interior[:, None]])
        dirichlet.append((nv + 2 * dirichlet_edges[:, None] + np.arange(2)).ravel())

    x, y = coords[:, 0], coords[:, 1]
    on_boundary = np.minimum.reduce([x, 1.0 - x, y, 1.0 - y]) <= BOUNDARY_TOL

    return DofMap(
        degree=degree,
        node_coords=coords,
        cell_to_nodes=cells.astype(np.int64),
        boundary_nodes=np.flatnonzero(on_boundary),
        dirichlet_nodes=np.unique(np.concatenate(dirichlet)).astype(np.int64),
    )
