import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

# Метки граничных рёбер: 1 - условие Дирихле, 2 - открытая граница (без условий)
DIRICHLET_TAG = 1
OPEN_TAG = 2

# Локальные рёбра треугольника: e0=(v0,v1), e1=(v1,v2), e2=(v2,v0)
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])

JITTER_RETRIES = 3


class MeshError(ValueError):
    """Некорректные параметры сетки или вырожденная/вывернутая сетка."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Конформная треугольная сетка единичного квадрата.

    vertices        - (NV, 2) координаты вершин
    triangles       - (NT, 3) индексы вершин, положительная ориентация
    boundary_edges  - (NE, 2) граничные рёбра (каждое ровно один раз)
    boundary_tags   - (NE,) метки рёбер (DIRICHLET_TAG / OPEN_TAG)
    level           - число равномерных измельчений от исходной сетки
    parents         - (NT,) индекс родительского треугольника или None
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    level: int = 0
    parents: Optional[np.ndarray] = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p0 = self.vertices[self.triangles[:, 0]]
        p1 = self.vertices[self.triangles[:, 1]]
        p2 = self.vertices[self.triangles[:, 2]]
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                      - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))

    @cached_property
    def _edge_table(self):
        pairs = np.sort(self.triangles[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        return edges, inverse.reshape(self.n_triangles, 3)

    @property
    def edges(self) -> np.ndarray:
        """Уникальные рёбра (g0 < g1), отсортированы лексикографически."""
        return self._edge_table[0]

    @property
    def cell_to_edge(self) -> np.ndarray:
        """(NT, 3): номер глобального ребра для каждого локального ребра."""
        return self._edge_table[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_index(self, pairs: np.ndarray) -> np.ndarray:
        """Номера глобальных рёбер для массива пар вершин (в любом порядке)."""
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        nv = self.n_vertices
        keys = self.edges[:, 0].astype(np.int64) * nv + self.edges[:, 1]
        wanted = pairs[:, 0] * nv + pairs[:, 1]
        idx = np.searchsorted(keys, wanted)
        idx = np.clip(idx, 0, len(keys) - 1)
        if not np.array_equal(keys[idx], wanted):
            raise MeshError("Edge is not part of the mesh")
        return idx

    def validate(self):
        """Проверяет ориентацию, покрытие площади и согласованность границы."""
        areas = self.signed_areas()
        if np.any(areas <= 0):
            raise MeshError(f"{int(np.sum(areas <= 0))} triangle(s) with non-positive area")
        total = areas.sum()
        if abs(total - 1.0) > 1e-12:
            raise MeshError(f"Triangle areas sum to {total!r}, expected 1")
        counts = np.bincount(self.cell_to_edge.ravel(), minlength=self.n_edges)
        if np.any(counts > 2):
            raise MeshError("Non-conforming mesh: an edge is shared by more than two triangles")
        boundary_from_cells = np.flatnonzero(counts == 1)
        tagged = np.sort(self.edge_index(self.boundary_edges))
        if len(np.unique(tagged)) != len(tagged):
            raise MeshError("Boundary edge listed more than once")
        if not np.array_equal(tagged, boundary_from_cells):
            raise MeshError("Boundary edge list does not match the mesh boundary")


def _square_triangles(n: int) -> np.ndarray:
    """Разбиение n x n квадратов чередующимися диагоналями."""
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    main = (ii + jj) % 2 == 0
    # угловые квадраты: диагональ проходит через угол области
    main[0, 0] = True
    main[n - 1, n - 1] = True
    main[0, n - 1] = False
    main[n - 1, 0] = False

    a = (jj * (n + 1) + ii).ravel()
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    main = main.ravel()
    first = np.where(main[:, None], np.column_stack([a, b, c]), np.column_stack([a, b, d]))
    second = np.where(main[:, None], np.column_stack([a, c, d]), np.column_stack([b, c, d]))
    return np.stack([first, second], axis=1).reshape(-1, 3)


def _square_boundary(n: int, open_boundary: bool):
    def vid(i, j):
        return j * (n + 1) + i

    k = np.arange(n)
    bottom = np.column_stack([vid(k, 0), vid(k + 1, 0)])
    right = np.column_stack([vid(n, k), vid(n, k + 1)])
    top = np.column_stack([vid(k + 1, n), vid(k, n)])
    left = np.column_stack([vid(0, k + 1), vid(0, k)])
    edges = np.vstack([bottom, right, top, left])
    tags = np.full(4 * n, DIRICHLET_TAG, dtype=np.int64)
    if open_boundary:
        tags[n:2 * n] = OPEN_TAG
    return edges, tags


def build_unit_square_mesh(n: int, perturbation: float = 0.0, seed: int = 0,
                           open_boundary: bool = False) -> Mesh:
    """
    Строит сетку единичного квадрата: (n+1)^2 вершин, 2n^2 треугольников.
    Внутренние вершины сдвигаются случайно на perturbation*h (детерминированно по seed).
    При open_boundary правая сторона (x=1) получает метку OPEN_TAG.
    """
    if int(n) != n or n < 2:
        raise MeshError(f"n must be an integer >= 2, got {n!r}")
    if not 0.0 <= perturbation <= 0.3:
        raise MeshError(f"perturbation must lie in [0, 0.3], got {perturbation!r}")
    n = int(n)
    h = 1.0 / n

    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    base = np.column_stack([ii.ravel() * h, jj.ravel() * h])
    triangles = _square_triangles(n)
    edges, tags = _square_boundary(n, open_boundary)

    interior = ((ii > 0) & (ii < n) & (jj > 0) & (jj < n)).ravel()
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-1.0, 1.0, size=base.shape)
    offsets[~interior] = 0.0

    amplitude = perturbation
    for attempt in range(JITTER_RETRIES + 1):
        vertices = base + amplitude * h * offsets
        mesh = Mesh(vertices=vertices, triangles=triangles, boundary_edges=edges,
                    boundary_tags=tags, level=0, parents=None)
        if np.all(mesh.signed_areas() > 0):
            if attempt:
                logging.warning(f"Mesh jitter reduced to {amplitude:.4f}h after {attempt} retries")
            return mesh
        amplitude *= 0.5
    raise MeshError(f"Jittered mesh n={n} stays inverted after {JITTER_RETRIES} retries")


def refine(mesh: Mesh) -> Mesh:
    """
    Равномерное (red) измельчение: каждый треугольник делится на 4 по серединам рёбер.
    Новые середины получают номера NV + номер ребра; метки границы наследуются.
    """
    nv = mesh.n_vertices
    edges = mesh.edges
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    t = mesh.triangles
    m = nv + mesh.cell_to_edge
    children = np.stack([
        np.column_stack([t[:, 0], m[:, 0], m[:, 2]]),
        np.column_stack([m[:, 0], t[:, 1], m[:, 1]]),
        np.column_stack([m[:, 2], m[:, 1], t[:, 2]]),
        np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
    ], axis=1).reshape(-1, 3)
    parents = np.repeat(np.arange(mesh.n_triangles), 4)

    mid = nv + mesh.edge_index(mesh.boundary_edges)
    a, b = mesh.boundary_edges[:, 0], mesh.boundary_edges[:, 1]
    boundary = np.stack([np.column_stack([a, mid]), np.column_stack([mid, b])], axis=1).reshape(-1, 2)
    tags = np.repeat(mesh.boundary_tags, 2)

    return Mesh(vertices=vertices, triangles=children, boundary_edges=boundary,
                boundary_tags=tags, level=mesh.level + 1, parents=parents)


def write_mesh(mesh: Mesh, path) -> None:
    """Текстовый формат: 'NV NT NE', затем вершины, треугольники, граничные рёбра с метками."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines += [f"{i} {j} {tag}" for (i, j), tag in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path) -> Mesh:
    """Читает сетку из текстового формата write_mesh и проверяет её."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Mesh file {path} not found")
    lines = [ln for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()]
    try:
        nv, nt, ne = (int(tok) for tok in lines[0].split())
        body = lines[1:]
        if len(body) < nv + nt + ne:
            raise MeshError(f"Mesh file {path} is truncated")
        vertices = np.array([[float(tok) for tok in ln.split()] for ln in body[:nv]], dtype=float)
        triangles = np.array([[int(tok) for tok in ln.split()] for ln in body[nv:nv + nt]], dtype=np.int64)
        tail = np.array([[int(tok) for tok in ln.split()] for ln in body[nv + nt:nv + nt + ne]], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"Cannot parse mesh file {path}: {exc}") from exc

    mesh = Mesh(vertices=vertices.reshape(nv, 2), triangles=triangles.reshape(nt, 3),
                boundary_edges=tail[:, :2].reshape(ne, 2), boundary_tags=tail[:, 2].reshape(ne),
                level=0, parents=None)
    mesh.validate()
    return mesh
