"""Variational prolongation between consecutive enriched spaces.

The transfer ``T = D^-1 B`` couples a coarse space to the next finer one per
subdomain: ``B_pq = (psi_p, phi_q^coarse)`` and ``D_pk = (psi_p, phi_k^fine)``
are integrated over the fine element parts ``K_i``.  With a dual multiplier
basis ``psi`` biorthogonal to the fine Lagrange basis on every part, ``D`` is
diagonal and ``T`` stays sparse (pseudo-L2 projection).  With ``psi = phi``
the result is the full L2 projection, kept for reference only.

Background meshes are nested, so each fine element lies inside its parent and
the coarse basis is evaluated through the parent map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .geometry import CutDecomposition
from .quadrature import DEGENERATE_AREA, triangle_rule_batch
from .space import EnrichedSpace
from .sparse_linalg import export_matrix_market, from_triplets

#: Dual basis coefficients on an uncut triangle: ``psi_j = 3 phi_j - sum_{k != j} phi_k``.
UNCUT_DUAL = 4.0 * np.eye(3) - np.ones((3, 3))

#: Prolongation weights below this magnitude are dropped.
PRUNE_TOL = 1e-14

#: Relative support measure below which a fine dof row is flagged and zeroed.
SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class BiorthogonalBasis:
    """Dual basis coefficients per cut element part.

    ``coeffs[c, s]`` maps the three Lagrange functions of cut element ``c``
    restricted to side ``s`` to the dual functions.  ``mass`` and ``mean``
    hold the part integrals ``int phi_j phi_k`` and ``int phi_j`` used to
    build them.  Uncut elements all share :data:`UNCUT_DUAL`.
    """

    coeffs: np.ndarray  # (nc, 2, 3, 3)
    mass: np.ndarray  # (nc, 2, 3, 3)
    mean: np.ndarray  # (nc, 2, 3)
    fallback: np.ndarray  # (nc, 2) bool, diagonal normalization was used

    def biorthogonality_defect(self) -> np.ndarray:
        """``max |C M - diag(mean)| / max(mean)`` per part."""
        prod = np.einsum("csjl,cslk->csjk", self.coeffs, self.mass)
        target = np.einsum("csj,jk->csjk", self.mean, np.eye(3))
        scale = np.maximum(self.mean.max(axis=2), np.finfo(float).tiny)
        return np.abs(prod - target).max(axis=(2, 3)) / scale


@dataclass(frozen=True, eq=False)
class TransferOperator:
    """Prolongation from a coarse enriched space to the next finer one."""

    T: sp.csr_matrix
    flagged: np.ndarray  # fine dofs whose row was zeroed
    fine_domain: np.ndarray
    coarse_domain: np.ndarray
    kind: str = "biorthogonal"

    @property
    def shape(self):
        return self.T.shape

    def cross_subdomain_entries(self) -> int:
        coo = self.T.tocoo()
        return int(np.count_nonzero(self.fine_domain[coo.row] != self.coarse_domain[coo.col]))

    def restrict_to(self, fine_keep: np.ndarray, coarse_keep: np.ndarray) -> "TransferOperator":
        """Sub-operator on selected fine rows and coarse columns (e.g. free dofs)."""
        flag = np.zeros(self.T.shape[0], dtype=bool)
        flag[self.flagged] = True
        return TransferOperator(
            self.T[fine_keep][:, coarse_keep].tocsr(),
            np.flatnonzero(flag[fine_keep]),
            self.fine_domain[fine_keep],
            self.coarse_domain[coarse_keep],
            self.kind,
        )

    def export(self, path) -> None:
        export_matrix_market(path, self.T)


def _part_integrals(decomp: CutDecomposition):
    """``int_{K_s} phi_j phi_k`` and ``int_{K_s} phi_j`` for every cut part."""
    mesh = decomp.mesh
    nc = decomp.n_cut
    mass = np.zeros((nc, 2, 3, 3))
    mean = np.zeros((nc, 2, 3))
    if len(decomp.sub_triangles):
        pts, w = triangle_rule_batch(decomp.sub_triangles, 2)
        phi = mesh.basis_values(decomp.cut_elements[decomp.sub_cut], pts)
        np.add.at(mass, (decomp.sub_cut, decomp.sub_side), np.einsum("mq,mqj,mqk->mjk", w, phi, phi))
        np.add.at(mean, (decomp.sub_cut, decomp.sub_side), np.einsum("mq,mqj->mj", w, phi))
    return mass, mean


def build_biorthogonal(decomp: CutDecomposition, space: EnrichedSpace | None = None) -> BiorthogonalBasis:
    """Dual coefficients ``C = diag(mean) M^-1`` on every cut part.

    Parts with an (almost) singular local mass matrix fall back to the
    diagonal normalization ``psi_j = (phi_j, 1) / (phi_j, phi_j) phi_j``.
    """
    mass, mean = _part_integrals(decomp)
    nc = decomp.n_cut
    coeffs = np.zeros((nc, 2, 3, 3))
    fallback = np.zeros((nc, 2), dtype=bool)
    if nc == 0:
        return BiorthogonalBasis(coeffs, mass, mean, fallback)
    area = decomp.part_areas
    elem_area = decomp.mesh.areas[decomp.cut_elements][:, None]
    live = area > DEGENERATE_AREA * elem_area
    cond = np.full((nc, 2), np.inf)
    cond[live] = np.linalg.cond(mass[live])
    good = live & (cond < 1e13)
    # M and D are symmetric/diagonal, so C = D M^-1 = (M^-1 D)^T
    rhs = np.einsum("pj,jk->pjk", mean[good], np.eye(3))
    coeffs[good] = np.swapaxes(np.linalg.solve(mass[good], rhs), 1, 2)
    weak = live & ~good
    if np.any(weak):
        diag = np.diagonal(mass[weak], axis1=1, axis2=2)
        coeffs[weak] = np.einsum("pj,jk->pjk", mean[weak] / diag, np.eye(3))
        fallback[weak] = True
    return BiorthogonalBasis(coeffs, mass, mean, fallback)


def _pieces(decomp: CutDecomposition):
    """Fine integration pieces: ``(triangles, element, subdomain, part_id)``.

    ``part_id`` is ``-1`` for uncut elements and ``2 * c + side`` for cut parts.
    """
    uncut = np.flatnonzero(decomp.element_domain >= 0)
    tri = np.concatenate([decomp.mesh.coords[uncut], decomp.sub_triangles])
    elem = np.concatenate([uncut, decomp.cut_elements[decomp.sub_cut]])
    dom = np.concatenate([decomp.element_domain[uncut], decomp.cut_domains[decomp.sub_cut, decomp.sub_side]])
    part = np.concatenate([np.full(len(uncut), -1), 2 * decomp.sub_cut + decomp.sub_side])
    return tri, elem, dom, part


def assemble_transfer(space_coarse: EnrichedSpace, space_fine: EnrichedSpace,
                      basis: BiorthogonalBasis | str = "biorthogonal") -> TransferOperator:
    """Prolongation ``T = D^-1 B`` from ``space_coarse`` to ``space_fine``.

    ``basis`` is a prebuilt :class:`BiorthogonalBasis`, ``"biorthogonal"`` to
    build one, or ``"lagrange"`` for the full L2 projection.
    """
    fine = space_fine.decomp
    coarse_mesh = space_coarse.mesh
    parent = fine.mesh.parent
    if parent is None:
        raise ValueError("fine mesh carries no parent map; build it with build_hierarchy")
    lagrange = isinstance(basis, str) and basis == "lagrange"
    if isinstance(basis, str) and not lagrange:
        if basis != "biorthogonal":
            raise ValueError(f"unknown multiplier basis {basis!r}")
        basis = build_biorthogonal(fine, space_fine)

    tri, elem, dom, part = _pieces(fine)
    pts, w = triangle_rule_batch(tri, 2)
    phi_f = fine.mesh.basis_values(elem, pts)
    phi_c = coarse_mesh.basis_values(parent[elem], pts)
    fine_dofs = space_fine.element_dofs(elem, dom)
    coarse_dofs = space_coarse.element_dofs(parent[elem], dom)
    M_fc = np.einsum("mq,mqj,mqk->mjk", w, phi_f, phi_c)

    nf, ncrs = space_fine.n_dofs, space_coarse.n_dofs
    missing = np.any(coarse_dofs < 0, axis=1)
    flagged = np.zeros(nf, dtype=bool)
    flagged[fine_dofs[missing].ravel()] = True

    if lagrange:
        M_ff = np.einsum("mq,mqj,mqk->mjk", w, phi_f, phi_f)
        rows = np.repeat(fine_dofs, 3, axis=1)
        D = from_triplets(rows, np.tile(fine_dofs, (1, 3)), M_ff.reshape(len(elem), -1), (nf, nf))
        ok = ~missing
        B = from_triplets(np.repeat(fine_dofs[ok], 3, axis=1), np.tile(coarse_dofs[ok], (1, 3)),
                          M_fc[ok].reshape(-1, 9), (nf, ncrs))
        T = sp.csr_matrix(sla.spsolve(D.tocsc(), B.tocsc()))
        T.eliminate_zeros()
        return TransferOperator(T, np.flatnonzero(flagged), space_fine.dof_domain,
                                space_coarse.dof_domain, "lagrange")

    # dual coefficients per piece; sub-triangles of one part share C
    C = np.broadcast_to(UNCUT_DUAL, (len(elem), 3, 3)).copy()
    cut_piece = part >= 0
    C[cut_piece] = basis.coeffs.reshape(-1, 3, 3)[part[cut_piece]]
    B_loc = np.einsum("mjl,mlk->mjk", C, M_fc)
    D_loc = np.einsum("mjl,ml->mj", C, np.einsum("mq,mqk->mk", w, phi_f))  # (psi_j, 1) = D_jj

    D = np.zeros(nf)
    np.add.at(D, fine_dofs, D_loc)
    support = np.zeros(nf)
    np.add.at(support, fine_dofs, np.abs(D_loc))
    scale = np.zeros(nf)
    np.maximum.at(scale, fine_dofs, np.repeat(fine.mesh.areas[elem][:, None], 3, axis=1))
    flagged |= np.abs(D) < SUPPORT_TOL * scale

    ok = ~missing
    rows = np.repeat(fine_dofs[ok], 3, axis=1).ravel()
    cols = np.tile(coarse_dofs[ok], (1, 3)).ravel()
    vals = B_loc[ok].reshape(-1)
    Dinv = np.where(flagged, 0.0, 1.0 / np.where(flagged, 1.0, D))
    T = sp.csr_matrix((vals * Dinv[rows], (rows, cols)), shape=(nf, ncrs))
    T.sum_duplicates()
    # weights that vanish analytically come out as round-off
    T.data[np.abs(T.data) < PRUNE_TOL] = 0.0
    T.eliminate_zeros()
    T.sort_indices()
    return TransferOperator(T, np.flatnonzero(flagged), space_fine.dof_domain, space_coarse.dof_domain)


def transfer_apply(op: TransferOperator, x) -> np.ndarray:
    """Prolongate a coarse vector."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != op.T.shape[1]:
        raise ValueError(f"expected coarse vector of length {op.T.shape[1]}, got {x.shape[0]}")
    return op.T @ x


def transfer_apply_transposed(op: TransferOperator, x) -> np.ndarray:
    """Restrict a fine vector with the exact transpose."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != op.T.shape[0]:
        raise ValueError(f"expected fine vector of length {op.T.shape[0]}, got {x.shape[0]}")
    return op.T.T @ x
