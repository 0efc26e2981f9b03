"""Semi-geometric multigrid: Galerkin coarse operators and V-cycles.

Levels are indexed ``0`` (coarsest) to ``L`` (finest).  ``transfers[l]``
prolongates from level ``l`` to level ``l + 1`` and its transpose restricts.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ConvergenceError
from .krylov import SolveReport, energy_norm, estimate_rho_star
from .sparse_linalg import DIRECT_SOLVE_MAX_DOFS, SparseFactorization, factorize_spd, triple_product

log = logging.getLogger(__name__)

SMOOTHERS = ("sgs", "jacobi")


@dataclass(frozen=True)
class SmootherConfig:
    kind: str = "sgs"
    sweeps: int = 3
    damping: float = 0.8

    def __post_init__(self):
        if self.kind not in SMOOTHERS:
            raise ConfigurationError(f"unknown smoother {self.kind!r}")
        if self.sweeps < 0:
            raise ConfigurationError("sweep count must be non-negative")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigurationError("damping must lie in (0, 1]")


@numba.njit(cache=True)
def _gs_sweep(indptr, indices, data, diag, x, b, backward):
    n = x.shape[0]
    for step in range(n):
        i = n - 1 - step if backward else step
        s = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j != i:
                s -= data[k] * x[j]
        x[i] = s / diag[i]


def _diagonal(A) -> np.ndarray:
    d = A.diagonal()
    if np.any(d == 0.0):
        raise ConfigurationError(f"zero diagonal entry in row {int(np.flatnonzero(d == 0.0)[0])}")
    return d


def smooth(A, x, b, config: SmootherConfig = SmootherConfig(), sweeps: int | None = None,
           diag: np.ndarray | None = None) -> np.ndarray:
    """Apply ``sweeps`` smoothing steps to ``A x = b`` starting from ``x`` (in place).

    One SGS step is a forward lexicographic sweep followed by a backward one.
    """
    sweeps = config.sweeps if sweeps is None else sweeps
    A = A if sp.isspmatrix_csr(A) else sp.csr_matrix(A)
    if x.shape[0] != A.shape[0] or b.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch in smoother")
    diag = _diagonal(A) if diag is None else diag
    b = np.ascontiguousarray(b, dtype=float)
    if config.kind == "sgs":
        for _ in range(sweeps):
            _gs_sweep(A.indptr, A.indices, A.data, diag, x, b, False)
            _gs_sweep(A.indptr, A.indices, A.data, diag, x, b, True)
    else:
        for _ in range(sweeps):
            x += config.damping * (b - A @ x) / diag
    return x


@dataclass(eq=False)
class MGHierarchy:
    operators: list  # A_0 .. A_L, CSR
    transfers: list  # P_l: level l -> l + 1
    smoother: SmootherConfig
    pre_sweeps: int
    post_sweeps: int
    coarse: SparseFactorization
    diagonals: list

    @property
    def n_levels(self) -> int:
        return len(self.operators)

    @property
    def finest(self):
        return self.operators[-1]

    def v_cycle(self, r: np.ndarray) -> np.ndarray:
        """Correction ``c_L`` for residual ``r_L`` (one V-cycle from zero)."""
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.finest.shape[0]:
            raise ValueError("residual length does not match the finest level")
        return self._cycle(self.n_levels - 1, r)

    def _cycle(self, level: int, r: np.ndarray) -> np.ndarray:
        if level == 0:
            return self.coarse.solve(r)
        A = self.operators[level]
        d = self.diagonals[level]
        c = np.zeros_like(r)
        smooth(A, c, r, self.smoother, self.pre_sweeps, d)
        P = self.transfers[level - 1]
        rc = P.T @ (r - A @ c)
        c += P @ self._cycle(level - 1, rc)
        smooth(A, c, r, self.smoother, self.post_sweeps, d)
        return c


def setup(A_fine, transfers, smoother: SmootherConfig = SmootherConfig(), pre_sweeps: int | None = None,
          post_sweeps: int | None = None, max_coarse_dofs: int = DIRECT_SOLVE_MAX_DOFS) -> MGHierarchy:
    """Galerkin chain ``A_{l-1} = P^T A_l P`` and coarsest-level factorization.

    ``transfers`` is ordered coarse to fine and may hold
    :class:`~nitsche_xfem.transfer.TransferOperator` objects or sparse matrices.
    """
    if len(transfers) < 1:
        raise ConfigurationError("a hierarchy needs at least two levels")
    mats = [sp.csr_matrix(getattr(t, "T", t)) for t in transfers]
    ops = [sp.csr_matrix(A_fine)]
    t0 = time.perf_counter()
    for P in reversed(mats):
        ops.append(triple_product(P, ops[-1], symmetric=True))
    ops.reverse()
    coarse = factorize_spd(ops[0], max_coarse_dofs)
    diagonals = [None] + [_diagonal(A) for A in ops[1:]]
    log.info("mg setup levels=%d sizes=%s time=%.2fs", len(ops), [A.shape[0] for A in ops],
             time.perf_counter() - t0)
    nu1 = smoother.sweeps if pre_sweeps is None else pre_sweeps
    nu2 = smoother.sweeps if post_sweeps is None else post_sweeps
    return MGHierarchy(ops, mats, smoother, nu1, nu2, coarse, diagonals)


def solve_stationary(hierarchy: MGHierarchy, f, tol: float = 1e-12, max_iters: int = 200):
    """Richardson iteration ``u <- u + V(f - A u)`` from ``u = 0``.

    Stops on the relative energy-norm residual.  The report carries the
    asymptotic rate estimate ``rho*`` from the last two iterate differences.
    """
    t0 = time.perf_counter()
    A = hierarchy.finest
    f = np.asarray(f, dtype=float)
    u = np.zeros_like(f)
    report = SolveReport("smg")
    r = f.copy()
    r0 = energy_norm(A, r)
    if r0 == 0.0:
        report.converged = True
        return u, report
    diffs = []
    for k in range(1, max_iters + 1):
        c = hierarchy.v_cycle(r)
        u += c
        Ac = A @ c
        diffs.append(float(np.sqrt(max(c @ Ac, 0.0))))
        r -= Ac
        rel = energy_norm(A, r) / r0
        report.residuals.append(rel)
        report.iterations = k
        if rel < tol:
            report.converged = True
            break
    report.rho_star = estimate_rho_star(diffs)
    report.wall_time = time.perf_counter() - t0
    log.info("smg iterations=%d rho*=%s time=%.2fs", report.iterations, report.rho_star, report.wall_time)
    if not report.converged:
        raise ConvergenceError(f"smg did not converge in {max_iters} iterations", report)
    return u, report
