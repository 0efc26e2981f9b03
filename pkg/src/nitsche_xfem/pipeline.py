"""End-to-end driver: discretize a problem on a mesh hierarchy and solve it.

Linear solvers act on the free (non-Dirichlet) dofs only.  Boundary values
are eliminated during assembly, so the reduced matrix is the free-dof block
of the eliminated system and the coarse spaces of the multigrid hierarchy
carry homogeneous boundary conditions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .geometry import classify_and_cut
from .krylov import SolveReport, cg, make_preconditioner
from .mesh import BackgroundHierarchy, build_hierarchy
from .multigrid import MGHierarchy, SmootherConfig, setup, solve_stationary
from .nitsche import NitscheConfig, assemble_system, compute_errors
from .problems import ProblemCoefficients
from .sparse_linalg import condition_number, sparse_direct_solve
from .space import EnrichedSpace, build_space
from .transfer import TransferOperator, assemble_transfer

log = logging.getLogger(__name__)

SOLVERS = ("cg-jacobi", "cg-sgs", "cg-smg", "smg", "direct")

#: Cells per side of the background mesh at levels L1, L2, L3, ...
BASE_CELLS = 100


def cells_at_level(level: int) -> int:
    """Cells per side of the level-``level`` background mesh (L1 has 100)."""
    if level < 1:
        raise ConfigurationError("levels start at 1")
    return BASE_CELLS * 2 ** (level - 1)


@dataclass(eq=False)
class Discretization:
    """Assembled system on the finest mesh of a background hierarchy."""

    problem: ProblemCoefficients
    config: NitscheConfig
    hierarchy: BackgroundHierarchy
    spaces: list
    A_full: sp.csr_matrix
    f_full: np.ndarray
    beta: np.ndarray
    stats: dict
    transfer_kind: str = "biorthogonal"
    _mg: dict = field(default_factory=dict, repr=False)

    @property
    def space(self) -> EnrichedSpace:
        return self.spaces[-1]

    @property
    def n_dofs(self) -> int:
        return self.space.n_dofs

    @cached_property
    def free(self) -> np.ndarray:
        return _free_dofs(self.space)

    @cached_property
    def A(self) -> sp.csr_matrix:
        return self.A_full[self.free][:, self.free].tocsr()

    @cached_property
    def f(self) -> np.ndarray:
        return self.f_full[self.free]

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Full dof vector from free values plus the prescribed boundary values."""
        u = self.f_full.copy()  # boundary entries hold the Dirichlet data
        u[self.free] = u_free
        return u

    @cached_property
    def transfers(self) -> list:
        """Free-dof prolongations, coarse to fine."""
        out = []
        for lc in range(len(self.spaces) - 1):
            sc, sf = self.spaces[lc], self.spaces[lc + 1]
            op = assemble_transfer(sc, sf, self.transfer_kind)
            out.append(op.restrict_to(_free_dofs(sf), _free_dofs(sc)))
        return out

    def multigrid(self, smoother: SmootherConfig = SmootherConfig()) -> MGHierarchy:
        if smoother not in self._mg:
            self._mg[smoother] = setup(self.A, self.transfers, smoother)
        return self._mg[smoother]

    def solve(self, solver: str = "cg-smg", tol: float = 1e-12, max_iters: int = 20000):
        """Solve the reduced system; returns the full dof vector and a report."""
        if solver == "direct":
            return self.expand(sparse_direct_solve(self.A, self.f)), SolveReport("direct", converged=True)
        if solver == "smg":
            u, rep = solve_stationary(self.multigrid(), self.f, tol, min(max_iters, 500))
        elif solver.startswith("cg-"):
            kind = solver[3:]
            mg = self.multigrid() if kind == "smg" else None
            u, rep = cg(self.A, self.f, make_preconditioner(kind, self.A, mg), tol, max_iters, method=solver)
        else:
            raise ConfigurationError(f"unknown solver {solver!r}; choose from {SOLVERS}")
        return self.expand(u), rep

    def errors(self, u: np.ndarray) -> tuple[float, float]:
        return compute_errors(self.space, self.problem, u, self.beta)

    def condition_number(self, tol: float = 1e-8) -> float:
        return condition_number(self.A, tol)


def _free_dofs(space: EnrichedSpace) -> np.ndarray:
    keep = np.ones(space.n_dofs, dtype=bool)
    keep[space.boundary_dofs] = False
    return np.flatnonzero(keep)


def discretize(problem: ProblemCoefficients, finest: int = 3, depth: int = 1,
               config: NitscheConfig | None = None, n_coarse: int | None = None,
               transfer_kind: str = "biorthogonal") -> Discretization:
    """Build spaces on ``depth`` nested meshes ending at level ``finest`` and assemble.

    ``n_coarse`` overrides the cells per side of the coarsest mesh; by default
    it is chosen so the finest mesh matches :func:`cells_at_level`.
    """
    config = config or NitscheConfig()
    if depth < 1:
        raise ConfigurationError("hierarchy depth must be at least 1")
    if n_coarse is None:
        n_fine = cells_at_level(finest)
        if n_fine % 2 ** (depth - 1):
            raise ConfigurationError(f"{n_fine} cells cannot be coarsened {depth - 1} times")
        n_coarse = n_fine // 2 ** (depth - 1)
    hier = build_hierarchy(n_coarse, depth)
    spaces = [build_space(classify_and_cut(m, problem.interfaces)) for m in hier.levels]
    A, f, res = assemble_system(spaces[-1], problem, config)
    log.info("discretized %s finest=%d cells dofs=%d", problem.name, hier.finest.n, spaces[-1].n_dofs)
    return Discretization(problem, config, hier, spaces, A, f, res.weights.beta, res.stats, transfer_kind)
