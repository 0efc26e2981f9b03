"""Assembly of the Nitsche-XFEM interface problem in three stabilized variants.

* ``N-EV``: penalty ``gamma_1 = 4 max(lambda_K)`` from a local generalized
  eigenproblem per cut element, coefficient/measure weighted averages.
* ``N-LO``: element lifting term plus ``gamma_2 = |Gamma_K| / sum_i |K_i|/alpha_i``.
* ``N-GP``: coefficient-only weights, penalty ``gamma_3 / h_K`` and a ghost
  penalty on the faces of cut elements.

Local matrices of a cut element act on six dofs: the three element nodes in
the side-0 subdomain followed by the same nodes in the side-1 subdomain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DegenerateElementError, NotPositiveDefiniteError
from .problems import ProblemCoefficients
from .quadrature import segment_rule_batch, triangle_rule_batch
from .space import EnrichedSpace, apply_dirichlet
from .sparse_linalg import as_operator, dense_generalized_eig_max, from_triplets

log = logging.getLogger(__name__)

VARIANTS = ("N-EV", "N-LO", "N-GP")

#: Columns spanning the kernel of the doubled element stiffness (one constant per copy).
ELEMENT_KERNEL = np.array([[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]]).T


@dataclass(frozen=True)
class NitscheConfig:
    variant: str = "N-GP"
    gamma0: float = 10.0
    eps_ghost: float = 0.1
    eig_safety: float = 4.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if min(self.gamma0, self.eps_ghost, self.eig_safety) <= 0.0:
            raise ConfigurationError("stabilization parameters must be positive")


@dataclass(frozen=True)
class InterfaceWeights:
    """Per cut element: average weights ``beta`` (nc, 2) and penalty factor ``gamma`` (nc,).

    ``gamma`` multiplies ``int_Gamma [u][v]`` directly (any ``1/h`` scaling is
    already included).
    """

    beta: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class CutElementData:
    """Geometric and algebraic ingredients shared by all interface terms."""

    dofs: np.ndarray  # (nc, 6)
    alpha: np.ndarray  # (nc, 2)
    grad_n: np.ndarray  # (nc, 3) normal derivative of the P1 basis
    jump_mean: np.ndarray  # (nc, 6) int_Gamma [phi]
    jump_mass: np.ndarray  # (nc, 3, 3) int_Gamma phi phi^T
    stiffness: np.ndarray  # (nc, 6, 6) block-diagonal part stiffness
    h: np.ndarray  # (nc,)


def measure_weights(space: EnrichedSpace) -> np.ndarray:
    d = space.decomp
    return d.part_areas / d.part_areas.sum(axis=1, keepdims=True)


def harmonic_weights(space: EnrichedSpace, coeffs: ProblemCoefficients) -> np.ndarray:
    """``beta_i = (|K_i| / alpha_i) / sum_j (|K_j| / alpha_j)``."""
    d = space.decomp
    alpha = np.asarray(coeffs.alpha)[d.cut_domains]
    w = d.part_areas / alpha
    return w / w.sum(axis=1, keepdims=True)


def coefficient_weights(space: EnrichedSpace, coeffs: ProblemCoefficients) -> np.ndarray:
    """``beta_1 = alpha_2 / (alpha_1 + alpha_2)``, ``beta_2 = alpha_1 / (alpha_1 + alpha_2)``."""
    alpha = np.asarray(coeffs.alpha)[space.decomp.cut_domains]
    return alpha[:, ::-1] / alpha.sum(axis=1, keepdims=True)


def cut_element_data(space: EnrichedSpace, coeffs: ProblemCoefficients) -> CutElementData:
    d = space.decomp
    mesh = d.mesh
    elems = d.cut_elements
    nc = len(elems)
    tri = mesh.triangles[elems]
    dofs = np.concatenate(
        [space.dof_map[d.cut_domains[:, 0, None], tri], space.dof_map[d.cut_domains[:, 1, None], tri]],
        axis=1,
    )
    alpha = np.asarray(coeffs.alpha, dtype=float)[d.cut_domains]
    G = mesh.gradients[elems]
    grad_n = np.einsum("ckd,cd->ck", G, d.normals)
    pts, w = segment_rule_batch(d.segments)
    phi = mesh.basis_values(elems, pts)  # (nc, 2, 3)
    mean = np.einsum("cq,cqk->ck", w, phi)
    jump_mean = np.concatenate([mean, -mean], axis=1)
    jump_mass = np.einsum("cq,cqk,cql->ckl", w, phi, phi)
    GG = np.einsum("ckd,cld->ckl", G, G)
    stiffness = np.zeros((nc, 6, 6))
    scale = alpha * d.part_areas
    stiffness[:, :3, :3] = scale[:, 0, None, None] * GG
    stiffness[:, 3:, 3:] = scale[:, 1, None, None] * GG
    return CutElementData(dofs, alpha, grad_n, jump_mean, jump_mass, stiffness, mesh.diameters[elems])


def _flux_average(data: CutElementData, beta: np.ndarray) -> np.ndarray:
    """Coefficients of ``{alpha d_n v}`` on the six local dofs (constant along Gamma_K)."""
    ba = beta * data.alpha
    return np.concatenate([ba[:, 0, None] * data.grad_n, ba[:, 1, None] * data.grad_n], axis=1)


def compute_weights_ev(space: EnrichedSpace, coeffs: ProblemCoefficients, safety: float = 4.0,
                       data: CutElementData | None = None) -> InterfaceWeights:
    """Harmonic weights and ``gamma_1 = safety * max lambda`` per cut element.

    ``lambda`` solves ``b_e(v, v) = lambda c_e(v, v)`` with ``b_e`` the Gram
    form of the weighted flux average on ``Gamma_K`` and ``c_e`` the part
    stiffness, both deflated of the per-copy constants.
    """
    data = data or cut_element_data(space, coeffs)
    beta = harmonic_weights(space, coeffs)
    g = _flux_average(data, beta)
    lengths = space.decomp.segment_lengths
    gamma = np.empty(len(g))
    for c in range(len(g)):
        b_e = lengths[c] * np.outer(g[c], g[c])
        try:
            gamma[c] = safety * dense_generalized_eig_max(b_e, data.stiffness[c], ELEMENT_KERNEL)
        except NotPositiveDefiniteError as exc:
            raise DegenerateElementError("degenerate eigenvalue pencil",
                                         int(space.decomp.cut_elements[c])) from exc
    return InterfaceWeights(beta, gamma)


def compute_weights_lo(space: EnrichedSpace, coeffs: ProblemCoefficients) -> InterfaceWeights:
    d = space.decomp
    alpha = np.asarray(coeffs.alpha)[d.cut_domains]
    gamma = d.segment_lengths / (d.part_areas / alpha).sum(axis=1)
    return InterfaceWeights(harmonic_weights(space, coeffs), gamma)


def compute_weights_gp(space: EnrichedSpace, coeffs: ProblemCoefficients, gamma0: float = 10.0) -> InterfaceWeights:
    d = space.decomp
    alpha = np.asarray(coeffs.alpha)[d.cut_domains]
    gamma3 = gamma0 * 2.0 * alpha[:, 0] * alpha[:, 1] / alpha.sum(axis=1)
    return InterfaceWeights(coefficient_weights(space, coeffs), gamma3 / d.mesh.diameters[d.cut_elements])


def compute_weights(space, coeffs, config: NitscheConfig, data=None) -> InterfaceWeights:
    if config.variant == "N-EV":
        return compute_weights_ev(space, coeffs, config.eig_safety, data)
    if config.variant == "N-LO":
        return compute_weights_lo(space, coeffs)
    return compute_weights_gp(space, coeffs, config.gamma0)


def _scatter(dofs: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1)
    cols = np.tile(dofs, (1, m))
    return from_triplets(rows, cols, local.reshape(len(dofs), -1), (n, n))


def assemble_volume(space: EnrichedSpace, coeffs: ProblemCoefficients):
    """``sum_i int_{Omega_i} alpha grad u . grad v`` and the load vector."""
    d = space.decomp
    mesh = d.mesh
    n = space.n_dofs
    G = mesh.gradients
    alpha = np.asarray(coeffs.alpha, dtype=float)

    dof_blocks, mat_blocks = [], []
    f = np.zeros(n)
    uncut = np.flatnonzero(d.element_domain >= 0)
    dom = d.element_domain[uncut]
    scale = alpha[dom] * mesh.areas[uncut]
    dof_blocks.append(space.element_dofs(uncut, dom))
    mat_blocks.append(scale[:, None, None] * np.einsum("ekd,eld->ekl", G[uncut], G[uncut]))

    # cut parts: one 3x3 block per side
    for side in (0, 1):
        el = d.cut_elements
        dm = d.cut_domains[:, side]
        s = alpha[dm] * d.part_areas[:, side]
        dof_blocks.append(space.element_dofs(el, dm))
        mat_blocks.append(s[:, None, None] * np.einsum("ekd,eld->ekl", G[el], G[el]))
    A = _scatter(np.concatenate(dof_blocks), np.concatenate(mat_blocks), n)

    # load vector: full elements and sub-triangles
    sub_elem = d.cut_elements[d.sub_cut]
    sub_dom = d.cut_domains[d.sub_cut, d.sub_side]
    pieces = [(mesh.coords[uncut], uncut, dom), (d.sub_triangles, sub_elem, sub_dom)]
    for tris, elems, doms in pieces:
        if len(elems) == 0:
            continue
        pts, w = triangle_rule_batch(tris, coeffs.load_degree)
        phi = mesh.basis_values(elems, pts)
        fv = np.empty(w.shape)
        for i, src in enumerate(coeffs.source):
            sel = doms == i
            if np.any(sel):
                fv[sel] = src(pts[sel, :, 0], pts[sel, :, 1])
        local = np.einsum("eq,eq,eqk->ek", w, fv, phi)
        np.add.at(f, space.element_dofs(elems, doms), local)
    return A, f


def assemble_interface_terms(space: EnrichedSpace, coeffs: ProblemCoefficients, weights: InterfaceWeights,
                             data: CutElementData | None = None) -> sp.csr_matrix:
    """Consistency, symmetry and penalty terms on the interface chords."""
    data = data or cut_element_data(space, coeffs)
    nc = len(data.dofs)
    g = _flux_average(data, weights.beta)
    J = data.jump_mean
    local = -(np.einsum("ck,cl->ckl", J, g) + np.einsum("ck,cl->ckl", g, J))
    Mg = weights.gamma[:, None, None] * data.jump_mass
    pen = np.zeros((nc, 6, 6))
    pen[:, :3, :3] = Mg
    pen[:, 3:, 3:] = Mg
    pen[:, :3, 3:] = -Mg
    pen[:, 3:, :3] = -Mg
    return _scatter(data.dofs, local + pen, space.n_dofs)


def _complement_basis() -> np.ndarray:
    Q, _ = np.linalg.qr(ELEMENT_KERNEL, mode="complete")
    return Q[:, 2:]


def lifting_matrices(space: EnrichedSpace, coeffs: ProblemCoefficients, beta: np.ndarray,
                     data: CutElementData | None = None) -> np.ndarray:
    """Local lifting operators ``(nc, 6, 6)`` mapping dof values to the lifted function.

    ``w = L u`` solves ``b_l(w, v) = c_l(u, v)`` for all ``v`` with ``w``
    orthogonal to the per-copy constants, where ``b_l`` is the part stiffness
    and ``c_l(u, v) = -int_Gamma [u] {alpha d_n v}``.
    """
    data = data or cut_element_data(space, coeffs)
    Q = _complement_basis()
    g = _flux_average(data, beta)
    Cp = np.einsum("ka,ckl,lb->cab", Q, data.stiffness, Q)
    try:
        np.linalg.cholesky(Cp)
    except np.linalg.LinAlgError:
        bad = [c for c in range(len(Cp)) if np.any(np.linalg.eigvalsh(Cp[c]) <= 0.0)]
        raise DegenerateElementError("singular deflated local stiffness",
                                     int(space.decomp.cut_elements[bad[0]]) if bad else None)
    y = np.linalg.solve(Cp, np.einsum("ka,ck->ca", Q, g)[..., None])[..., 0]
    w = np.einsum("ka,ca->ck", Q, y)  # C^+ g
    return -np.einsum("ck,cl->ckl", w, data.jump_mean)


def assemble_lifting_terms(space: EnrichedSpace, coeffs: ProblemCoefficients, beta: np.ndarray,
                           data: CutElementData | None = None) -> sp.csr_matrix:
    """``2 sum_K sum_i int_{K_i} alpha grad L_K(u) . grad L_K(v)``."""
    data = data or cut_element_data(space, coeffs)
    L = lifting_matrices(space, coeffs, beta, data)
    local = 2.0 * np.einsum("cka,ckl,clb->cab", L, data.stiffness, L)
    return _scatter(data.dofs, local, space.n_dofs)


def assemble_ghost_penalty(space: EnrichedSpace, coeffs: ProblemCoefficients, eps_ghost: float = 0.1) -> sp.csr_matrix:
    """``sum_i sum_G eps_G h_G alpha_i int_G [d_n u][d_n v]`` over the ghost faces.

    P1 normal-derivative jumps are constant on a face, so each face contributes
    ``eps_G * alpha_i * |G|^2`` times the outer product of the jump vector.
    """
    d = space.decomp
    mesh = d.mesh
    edges = mesh.edges
    alpha = np.asarray(coeffs.alpha, dtype=float)
    dof_blocks, mat_blocks = [], []
    for i, faces in enumerate(d.ghost_faces):
        if len(faces) == 0:
            continue
        eid, e1, e2 = faces.T
        ab = mesh.vertices[edges.vertices[eid]]
        t = ab[:, 1] - ab[:, 0]
        length = np.hypot(t[:, 0], t[:, 1])
        nrm = np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]
        jv = np.concatenate(
            [np.einsum("ekd,ed->ek", mesh.gradients[e1], nrm), -np.einsum("ekd,ed->ek", mesh.gradients[e2], nrm)],
            axis=1,
        )
        dofs = np.concatenate([space.dof_map[i, mesh.triangles[e1]], space.dof_map[i, mesh.triangles[e2]]], axis=1)
        scale = eps_ghost * alpha[i] * length**2
        dof_blocks.append(dofs)
        mat_blocks.append(scale[:, None, None] * np.einsum("ek,el->ekl", jv, jv))
    if not dof_blocks:
        return sp.csr_matrix((space.n_dofs, space.n_dofs))
    return _scatter(np.concatenate(dof_blocks), np.concatenate(mat_blocks), space.n_dofs)


@dataclass
class AssemblyResult:
    A: sp.csr_matrix
    f: np.ndarray
    weights: InterfaceWeights
    stats: dict


def assemble(space: EnrichedSpace, coeffs: ProblemCoefficients, config: NitscheConfig = NitscheConfig()) -> AssemblyResult:
    """Stiffness matrix and load vector of the chosen variant (before boundary conditions)."""
    A, f = assemble_volume(space, coeffs)
    data = cut_element_data(space, coeffs)
    weights = compute_weights(space, coeffs, config, data)
    if space.decomp.n_cut:
        A = A + assemble_interface_terms(space, coeffs, weights, data)
        if config.variant == "N-LO":
            A = A + assemble_lifting_terms(space, coeffs, weights.beta, data)
        elif config.variant == "N-GP":
            A = A + assemble_ghost_penalty(space, coeffs, config.eps_ghost)
    # the form is symmetric; remove round-off from the summation order
    A = as_operator(0.5 * (A + A.T))
    d = space.decomp
    frac = d.part_areas.min(axis=1) / d.part_areas.sum(axis=1) if d.n_cut else np.array([np.nan])
    stats = {
        "variant": config.variant,
        "dofs": space.n_dofs,
        "cut_elements": int(d.n_cut),
        "min_cut_fraction": float(np.min(frac)),
        "gamma_min": float(weights.gamma.min()) if d.n_cut else float("nan"),
        "gamma_max": float(weights.gamma.max()) if d.n_cut else float("nan"),
    }
    log.info("assembly %s", " ".join(f"{k}={v}" for k, v in stats.items()))
    return AssemblyResult(A, f, weights, stats)


def assemble_system(space: EnrichedSpace, coeffs: ProblemCoefficients, config: NitscheConfig = NitscheConfig()):
    """Assemble and apply the Dirichlet data of ``coeffs``; returns ``(A, f, result)``."""
    res = assemble(space, coeffs, config)
    A, f = apply_dirichlet(space, res.A, res.f, coeffs.boundary_values)
    return A, f, res


def compute_errors(space: EnrichedSpace, coeffs: ProblemCoefficients, u_h: np.ndarray,
                   beta: np.ndarray | None = None, degree: int = 5) -> tuple[float, float]:
    """``(||u - u_h||_L2, |||u - u_h|||_h)`` against the exact solution of ``coeffs``.

    The mesh-dependent norm adds ``h^-1 ||[e]||^2`` and ``h ||{d_n e}||^2`` on
    every interface chord, with the average weighted by ``beta`` (measure
    fractions if omitted).
    """
    if coeffs.exact is None:
        raise ConfigurationError("exact solution required for error computation")
    d = space.decomp
    mesh = d.mesh
    u_h = np.asarray(u_h, dtype=float)
    uncut = np.flatnonzero(d.element_domain >= 0)
    pieces = [
        (mesh.coords[uncut], uncut, d.element_domain[uncut]),
        (d.sub_triangles, d.cut_elements[d.sub_cut], d.cut_domains[d.sub_cut, d.sub_side]),
    ]
    l2 = 0.0
    h1 = 0.0
    for tris, elems, doms in pieces:
        if len(elems) == 0:
            continue
        pts, w = triangle_rule_batch(tris, degree)
        phi = mesh.basis_values(elems, pts)
        U = u_h[space.element_dofs(elems, doms)]  # (m, 3)
        uh = np.einsum("eqk,ek->eq", phi, U)
        guh = np.einsum("ekd,ek->ed", mesh.gradients[elems], U)
        ue = np.empty(w.shape)
        gx = np.empty(w.shape)
        gy = np.empty(w.shape)
        for i in range(coeffs.n_subdomains):
            sel = doms == i
            if np.any(sel):
                x, y = pts[sel, :, 0], pts[sel, :, 1]
                ue[sel] = coeffs.exact[i](x, y)
                gx[sel], gy[sel] = coeffs.exact_grad[i](x, y)
        l2 += np.sum(w * (ue - uh) ** 2)
        h1 += np.sum(w * ((gx - guh[:, None, 0]) ** 2 + (gy - guh[:, None, 1]) ** 2))

    jump = 0.0
    flux = 0.0
    if d.n_cut:
        if beta is None:
            beta = measure_weights(space)
        el = d.cut_elements
        pts, w = segment_rule_batch(d.segments)
        phi = mesh.basis_values(el, pts)  # (nc, 2, 3)
        G = mesh.gradients[el]
        h = mesh.diameters[el]
        err = []
        dn = []
        for side in (0, 1):
            doms = d.cut_domains[:, side]
            U = u_h[space.element_dofs(el, doms)]
            uh = np.einsum("cqk,ck->cq", phi, U)
            guh_n = np.einsum("ckd,ck,cd->c", G, U, d.normals)
            ue = np.empty(w.shape)
            gn = np.empty(w.shape)
            for i in range(coeffs.n_subdomains):
                sel = doms == i
                if np.any(sel):
                    x, y = pts[sel, :, 0], pts[sel, :, 1]
                    ue[sel] = coeffs.exact[i](x, y)
                    gxs, gys = coeffs.exact_grad[i](x, y)
                    gn[sel] = gxs * d.normals[sel, 0, None] + gys * d.normals[sel, 1, None]
            err.append(ue - uh)
            dn.append(gn - guh_n[:, None])
        jump = np.sum(w * (err[0] - err[1]) ** 2 / h[:, None])
        avg = beta[:, 0, None] * dn[0] + beta[:, 1, None] * dn[1]
        flux = np.sum(w * avg**2 * h[:, None])
    return float(np.sqrt(l2)), float(np.sqrt(h1 + jump + flux))
