"""Heaviside-enriched (doubled) P1 spaces on a cut background mesh."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .geometry import CutDecomposition
from .quadrature import signed_areas


@dataclass(frozen=True, eq=False)
class EnrichedSpace:
    """Dof numbering of ``V_h = V_h,0 (+) V_h,1 (+) ...``.

    Dofs are numbered subdomain-major and node-id-minor: all dofs of
    subdomain 0 in increasing node order, then subdomain 1, and so on.
    ``dof_map[i, p]`` is the dof of node ``p`` in subdomain ``i`` or -1.
    """

    decomp: CutDecomposition
    node_sets: list
    dof_map: np.ndarray
    dof_node: np.ndarray
    dof_domain: np.ndarray

    @property
    def mesh(self):
        return self.decomp.mesh

    @property
    def n_dofs(self) -> int:
        return len(self.dof_node)

    @property
    def n_subdomains(self) -> int:
        return self.decomp.n_subdomains

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        on = np.zeros(self.mesh.n_vertices, dtype=bool)
        on[self.mesh.boundary_vertices] = True
        return np.flatnonzero(on[self.dof_node])

    @cached_property
    def dof_coords(self) -> np.ndarray:
        return self.mesh.vertices[self.dof_node]

    def element_dofs(self, elements, subdomain) -> np.ndarray:
        """Dofs of the three element nodes in ``subdomain`` (broadcasting)."""
        return self.dof_map[np.asarray(subdomain)[..., None], self.mesh.triangles[elements]]

    def interpolate(self, funcs) -> np.ndarray:
        """Nodal interpolant; ``funcs[i](x, y)`` is the function on subdomain ``i``.

        A single callable is used for every subdomain.
        """
        if callable(funcs):
            funcs = [funcs] * self.n_subdomains
        out = np.empty(self.n_dofs)
        xy = self.dof_coords
        for i, f in enumerate(funcs):
            sel = self.dof_domain == i
            out[sel] = f(xy[sel, 0], xy[sel, 1])
        return out


def build_space(decomp: CutDecomposition) -> EnrichedSpace:
    """Collect ``N_i`` = nodes of elements with a positive-measure part in subdomain ``i``."""
    mesh = decomp.mesh
    node_sets = [np.unique(mesh.triangles[decomp.elements_of(i)]) for i in range(decomp.n_subdomains)]
    dof_map = np.full((decomp.n_subdomains, mesh.n_vertices), -1, dtype=np.int64)
    start = 0
    for i, nodes in enumerate(node_sets):
        dof_map[i, nodes] = np.arange(start, start + len(nodes))
        start += len(nodes)
    dof_node = np.concatenate(node_sets) if node_sets else np.zeros(0, dtype=np.int64)
    dof_domain = np.concatenate([np.full(len(n), i) for i, n in enumerate(node_sets)])
    return EnrichedSpace(decomp, node_sets, dof_map, dof_node, dof_domain)


@dataclass(frozen=True)
class BasisEvaluation:
    element: int
    subdomain: int
    values: np.ndarray  # (3,)
    gradients: np.ndarray  # (3, 2)
    dofs: np.ndarray  # (3,)


def _in_triangle(tri: np.ndarray, point: np.ndarray, tol: float = 1e-12) -> bool:
    total = signed_areas(tri)
    for k in range(3):
        sub = tri.copy()
        sub[k] = point
        if signed_areas(sub) < -tol * abs(total):
            return False
    return True


def evaluate_basis(space: EnrichedSpace, element: int, subdomain: int, point) -> BasisEvaluation:
    """Truncated P1 basis of ``element`` for ``subdomain`` at a physical point.

    Returns the standard barycentric values and gradients when the point lies
    in the element part ``K_i`` and zeros otherwise.
    """
    decomp = space.decomp
    mesh = space.mesh
    point = np.asarray(point, dtype=float)
    c = decomp.cut_index[element]
    if c < 0:
        if decomp.element_domain[element] != subdomain:
            raise ValueError(f"subdomain {subdomain} does not touch element {element}")
        inside = True
    else:
        sides = np.flatnonzero(decomp.cut_domains[c] == subdomain)
        if len(sides) == 0:
            raise ValueError(f"subdomain {subdomain} does not touch element {element}")
        inside = any(_in_triangle(t, point) for t in decomp.part(c, sides[0]))
    dofs = space.dof_map[subdomain, mesh.triangles[element]]
    if not inside:
        return BasisEvaluation(element, subdomain, np.zeros(3), np.zeros((3, 2)), dofs)
    values = mesh.basis_values(np.array(element), point)
    return BasisEvaluation(element, subdomain, values, mesh.gradients[element].copy(), dofs)


def apply_dirichlet(space: EnrichedSpace, A, f, g):
    """Symmetric elimination of the boundary dofs.

    ``g`` is either a callable ``g(x, y, subdomain_array)`` or a vector of
    prescribed values for all dofs (only boundary entries are used).  Returns
    ``(A', f')`` with identity rows/columns on boundary dofs, ``f`` corrected
    by the boundary lift, and the boundary entries of ``f'`` set to ``g``.
    """
    n = space.n_dofs
    bnd = space.boundary_dofs
    lift = np.zeros(n)
    if callable(g):
        xy = space.dof_coords[bnd]
        lift[bnd] = g(xy[:, 0], xy[:, 1], space.dof_domain[bnd])
    else:
        lift[bnd] = np.asarray(g, dtype=float)[bnd]
    A = sp.csr_matrix(A)
    keep = np.ones(n)
    keep[bnd] = 0.0
    K = sp.diags(keep)
    f_new = np.asarray(f, dtype=float) - A @ lift
    f_new[bnd] = lift[bnd]
    A_new = (K @ A @ K + sp.diags(1.0 - keep)).tocsr()
    A_new.eliminate_zeros()
    A_new.sort_indices()
    return A_new, f_new
