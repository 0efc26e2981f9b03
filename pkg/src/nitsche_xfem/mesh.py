"""Nested structured triangular meshes of the unit square."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .quadrature import signed_areas


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """``n x n`` quads on ``[0, 1]^2``, each split along its lower-left/upper-right diagonal.

    Cell ``(i, j)`` owns elements ``2 * (j * n + i)`` (below the diagonal) and
    ``2 * (j * n + i) + 1`` (above it).  Vertex ``(i, j)`` has index
    ``j * (n + 1) + i``.
    """

    n: int
    vertices: np.ndarray
    triangles: np.ndarray
    parent: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def structured(cls, n: int) -> "TriangleMesh":
        if n < 1:
            raise ValueError("need at least one cell per direction")
        xs = np.linspace(0.0, 1.0, n + 1)
        X, Y = np.meshgrid(xs, xs)
        vertices = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(n), np.arange(n))
        i, j = i.ravel(), j.ravel()
        v00 = j * (n + 1) + i
        v10 = v00 + 1
        v01 = v00 + n + 1
        v11 = v01 + 1
        tris = np.empty((2 * n * n, 3), dtype=np.int64)
        tris[0::2] = np.column_stack([v00, v10, v11])
        tris[1::2] = np.column_stack([v00, v11, v01])
        return cls(n, vertices, tris)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def coords(self) -> np.ndarray:
        """Element vertex coordinates, ``(n_elements, 3, 2)``."""
        return self.vertices[self.triangles]

    @cached_property
    def areas(self) -> np.ndarray:
        return signed_areas(self.coords)

    @cached_property
    def diameters(self) -> np.ndarray:
        c = self.coords
        edges = c[:, [1, 2, 0], :] - c
        return np.sqrt((edges**2).sum(axis=2)).max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def gradients(self) -> np.ndarray:
        """Constant P1 basis gradients per element, ``(n_elements, 3, 2)``."""
        c = self.coords
        x, y = c[..., 0], c[..., 1]
        twice = 2.0 * self.areas
        g = np.empty_like(c)
        for k in range(3):
            a, b = (k + 1) % 3, (k + 2) % 3
            g[:, k, 0] = (y[:, a] - y[:, b]) / twice
            g[:, k, 1] = (x[:, b] - x[:, a]) / twice
        return g

    def basis_values(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        """P1 basis values of ``elements`` at ``points`` (shape ``(..., 2)``).

        ``elements`` broadcasts against the leading axes of ``points``; the
        result has shape ``points.shape[:-1] + (3,)``.
        """
        elements = np.asarray(elements)
        g = self.gradients[elements]  # (..., 3, 2)
        x0 = self.coords[elements]  # (..., 3, 2)
        extra = points.ndim - 1 - elements.ndim
        for _ in range(extra):
            g = g[..., None, :, :]
            x0 = x0[..., None, :, :]
        return 1.0 + np.einsum("...kd,...kd->...k", g, points[..., None, :] - x0)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Element containing each point (ties resolved toward the lower cell)."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        s = p * self.n
        i = np.clip(np.floor(s[:, 0]).astype(np.int64), 0, self.n - 1)
        j = np.clip(np.floor(s[:, 1]).astype(np.int64), 0, self.n - 1)
        upper = (s[:, 1] - j) > (s[:, 0] - i)
        return 2 * (j * self.n + i) + upper

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        v = self.vertices
        on = (v[:, 0] == 0.0) | (v[:, 0] == 1.0) | (v[:, 1] == 0.0) | (v[:, 1] == 1.0)
        return np.flatnonzero(on)

    @cached_property
    def edges(self) -> "EdgeTable":
        local = np.array([[1, 2], [2, 0], [0, 1]])  # edge k is opposite vertex k
        pairs = self.triangles[:, local]  # (ne, 3, 2)
        key = np.sort(pairs, axis=2).reshape(-1, 2)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        elem = np.repeat(np.arange(self.n_elements), 3)
        first = np.full(len(uniq), -1, dtype=np.int64)
        second = np.full(len(uniq), -1, dtype=np.int64)
        order = np.argsort(inv, kind="stable")
        inv_sorted = inv[order]
        starts = np.r_[0, np.flatnonzero(np.diff(inv_sorted)) + 1]
        first[inv_sorted[starts]] = elem[order[starts]]
        has_two = np.r_[np.diff(inv_sorted) == 0, False]
        second[inv_sorted[has_two]] = elem[order[np.flatnonzero(has_two) + 1]]
        return EdgeTable(uniq, first, second, inv.reshape(-1, 3))


@dataclass(frozen=True, eq=False)
class EdgeTable:
    """Unique mesh edges and their (one or two) adjacent elements."""

    vertices: np.ndarray  # (n_edges, 2) sorted vertex ids
    left: np.ndarray  # first adjacent element
    right: np.ndarray  # second adjacent element or -1 on the boundary
    of_element: np.ndarray  # (n_elements, 3) edge id opposite each local vertex


@dataclass(frozen=True, eq=False)
class BackgroundHierarchy:
    """Nested uniform refinements; ``levels[0]`` is the coarsest mesh."""

    levels: list

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> TriangleMesh:
        return self.levels[-1]

    def children(self, level: int, element: int) -> np.ndarray:
        """Elements of ``level + 1`` whose parent is ``element``."""
        return np.flatnonzero(self.levels[level + 1].parent == element)


def build_hierarchy(n_coarse: int, n_levels: int) -> BackgroundHierarchy:
    """Structured mesh with ``n_coarse`` cells per side plus ``n_levels - 1`` refinements."""
    if n_coarse < 1 or n_levels < 1:
        raise ValueError("n_coarse and n_levels must be positive")
    levels = [TriangleMesh.structured(n_coarse)]
    for _ in range(1, n_levels):
        coarse = levels[-1]
        fine = TriangleMesh.structured(2 * coarse.n)
        centroids = fine.coords.mean(axis=1)
        parent = coarse.locate(centroids)
        levels.append(TriangleMesh(fine.n, fine.vertices, fine.triangles, parent))
    return BackgroundHierarchy(levels)
