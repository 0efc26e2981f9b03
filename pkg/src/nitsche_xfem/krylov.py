"""Preconditioned conjugate gradients with energy-norm termination.

Convergence is measured by the relative residual in the energy norm,
``||f - A u_k||_A / ||f - A u_0||_A < tol`` with ``||r||_A = sqrt(r^T A r)``
and ``u_0 = 0``.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ConvergenceError, NotPositiveDefiniteError

log = logging.getLogger(__name__)

#: Compare the recurrence residual with the true one every this many iterations.
RESIDUAL_REFRESH = 50
PRECONDITIONERS = ("none", "jacobi", "sgs", "smg")

Preconditioner = Callable[[np.ndarray], np.ndarray]


@dataclass
class SolveReport:
    """Outcome of an iterative solve.

    ``residuals`` holds the relative energy-norm residual after every
    iteration; ``rho_star`` is set by stationary solvers only.
    """

    method: str
    iterations: int = 0
    residuals: list = field(default_factory=list)
    rho_star: float | None = None
    kappa: float | None = None
    wall_time: float = 0.0
    converged: bool = False

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


def energy_norm(A, r: np.ndarray) -> float:
    return float(np.sqrt(max(r @ (A @ r), 0.0)))


def estimate_rho_star(diff_norms) -> float | None:
    """Ratio of the last two iterate differences ``||u_{k+1} - u_k||_A / ||u_k - u_{k-1}||_A``.

    ``diff_norms[k]`` is ``||u_{k+1} - u_k||_A``.  Returns None with fewer
    than two differences or a vanishing denominator.
    """
    d = list(diff_norms)
    if len(d) < 2 or d[-2] < 1e-300:
        return None
    return float(d[-1] / d[-2])


def jacobi_preconditioner(A) -> Preconditioner:
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise NotPositiveDefiniteError("non-positive diagonal entry")
    inv = 1.0 / diag
    return lambda r: inv * r


def sgs_preconditioner(A) -> Preconditioner:
    """One symmetric Gauss-Seidel sweep (forward then backward) from zero."""
    from .multigrid import SmootherConfig, smooth

    A = sp.csr_matrix(A)
    cfg = SmootherConfig("sgs", 1)
    return lambda r: smooth(A, np.zeros_like(r), r, cfg)


def make_preconditioner(kind: str, A, hierarchy=None) -> Preconditioner | None:
    if kind == "none":
        return None
    if kind == "jacobi":
        return jacobi_preconditioner(A)
    if kind == "sgs":
        return sgs_preconditioner(A)
    if kind == "smg":
        if hierarchy is None:
            raise ConfigurationError("the smg preconditioner needs a multigrid hierarchy")
        return hierarchy.v_cycle
    raise ConfigurationError(f"unknown preconditioner {kind!r}; choose from {PRECONDITIONERS}")


def check_symmetric_preconditioner(precond: Preconditioner, n: int, trials: int = 3,
                                   rtol: float = 1e-10, seed: int = 0) -> float:
    """Largest relative defect of ``(P r) . s = (P s) . r`` over random pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        r, s = rng.standard_normal(n), rng.standard_normal(n)
        a, b = precond(r) @ s, precond(s) @ r
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    if worst > rtol:
        raise ConfigurationError(f"preconditioner is not symmetric (defect {worst:.2e})")
    return worst


def cg(A, f, precond: Preconditioner | None = None, tol: float = 1e-12, max_iters: int = 20000,
       u0: np.ndarray | None = None, method: str = "cg", callback=None):
    """Preconditioned CG for SPD ``A``; returns ``(u, SolveReport)``.

    Raises
    ------
    NotPositiveDefiniteError
        If a search direction has non-positive curvature.
    ConvergenceError
        If ``max_iters`` is reached; the partial report is attached.
    """
    t0 = time.perf_counter()
    A = sp.csr_matrix(A) if sp.issparse(A) else A
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
    report = SolveReport(method)
    r = f - A @ u
    if not np.any(r):
        report.converged = True
        report.wall_time = time.perf_counter() - t0
        return u, report
    rAr = r @ (A @ r)
    if rAr <= 0.0:
        raise NotPositiveDefiniteError("initial residual has non-positive energy")
    r0 = float(np.sqrt(rAr))
    z = precond(r) if precond else r.copy()
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iters + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise NotPositiveDefiniteError(f"non-positive curvature {pAp:.3e} at iteration {k}")
        a = rz / pAp
        u += a * p
        r -= a * Ap
        rel = energy_norm(A, r) / r0
        restart = False
        if rel < tol or k % RESIDUAL_REFRESH == 0:
            # compare with the true residual; replace it if the recurrence drifted
            r_true = f - A @ u
            drift = energy_norm(A, r_true - r) / r0
            if rel < tol or drift > rel:
                r = r_true
                rel = energy_norm(A, r) / r0
                restart = True
        report.residuals.append(rel)
        report.iterations = k
        if callback is not None:
            callback(k, u)
        if rel < tol:
            report.converged = True
            break
        z = precond(r) if precond else r.copy()
        rz_new = r @ z
        p = z if restart else z + (rz_new / rz) * p
        rz = rz_new
    report.wall_time = time.perf_counter() - t0
    log.info("%s iterations=%d residual=%.3e time=%.2fs", method, report.iterations,
             report.final_residual, report.wall_time)
    if not report.converged:
        raise ConvergenceError(f"{method} did not converge in {max_iters} iterations", report)
    return u, report


CSV_FIELDS = ("variant", "preconditioner", "level", "iterations", "rho_star", "kappa", "wall_time")


def report_row(report: SolveReport, variant: str, level: int | str) -> dict:
    return {
        "variant": variant,
        "preconditioner": report.method,
        "level": level,
        "iterations": report.iterations,
        "rho_star": "" if report.rho_star is None else f"{report.rho_star:.6g}",
        "kappa": "" if report.kappa is None else f"{report.kappa:.6g}",
        "wall_time": f"{report.wall_time:.3f}",
    }


def write_reports(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        w.writerows(rows)
