"""Dense and sparse linear-algebra kernels shared by the solver modules.

Sparse operators are plain :class:`scipy.sparse.csr_matrix` objects kept in
canonical form (sorted column indices, duplicates merged).  The helpers in
this module add the dimension checks, symmetry handling and error reporting
the rest of the package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConvergenceError, NotPositiveDefiniteError

#: Coarsest-level systems above this size are rejected by the direct solver.
DIRECT_SOLVE_MAX_DOFS = 50_000
#: Condition-number estimates are only computed up to this size.
EIGS_MAX_DOFS = 200_000


def as_operator(A) -> sp.csr_matrix:
    """Return ``A`` as a canonical CSR matrix (sorted indices, no duplicates)."""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def from_triplets(rows, cols, vals, shape) -> sp.csr_matrix:
    """Build a canonical CSR matrix from COO triplets, summing duplicates."""
    A = sp.coo_matrix(
        (np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape
    ).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def is_symmetric(A, rtol: float = 1e-12) -> bool:
    """Entrywise check ``|A_ij - A_ji| <= rtol * max(|A_ij|, |A_ji|, 1)``."""
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        return False
    At = A.T.tocsr()
    diff = abs(A - At)
    scale = sp.csr_matrix(abs(A)).maximum(abs(At))
    if diff.nnz == 0:
        return True
    diff = diff.tocoo()
    bound = rtol * np.maximum(np.asarray(scale[diff.row, diff.col]).ravel(), 1.0)
    return bool(np.all(diff.data <= bound))


def spmv(A, x) -> np.ndarray:
    """Sparse matrix-vector product with a dimension check."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise ValueError(
            f"dimension mismatch: operator has {A.shape[1]} columns, vector has "
            f"shape {x.shape}"
        )
    return A @ x


def triple_product(P, A, symmetric: bool | None = None) -> sp.csr_matrix:
    """Galerkin product ``P^T A P``.

    The restriction is always the exact transpose of ``P``.  When ``A`` is
    symmetric (detected if ``symmetric`` is None) the result is symmetrized so
    that round-off does not break the symmetry of coarse operators.
    """
    P = sp.csr_matrix(P)
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1] or A.shape[1] != P.shape[0]:
        raise ValueError(f"cannot form P^T A P with A {A.shape} and P {P.shape}")
    R = P.T.tocsr()
    C = as_operator(R @ (A @ P))
    if symmetric is None:
        symmetric = is_symmetric(A)
    if symmetric:
        C = as_operator(0.5 * (C + C.T))
    return C


def _orthonormal_complement(kernel: np.ndarray, n: int) -> np.ndarray:
    K = np.asarray(kernel, dtype=float).reshape(n, -1)
    Q, _ = np.linalg.qr(K, mode="complete")
    return Q[:, K.shape[1]:]


def dense_generalized_eig_max(B, C, kernel) -> float:
    """Largest eigenvalue of the pencil ``B x = lam C x`` on ``kernel``'s complement.

    ``kernel`` is a vector or an ``n x k`` matrix whose columns span the null
    space of ``C``.  Both matrices are projected onto an orthonormal basis of the
    complement, the projected ``C`` is Cholesky-factored and the problem is
    reduced to a standard symmetric one.

    Raises
    ------
    NotPositiveDefiniteError
        If the projected ``C`` is not positive definite.
    """
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if B.shape != (n, n) or C.shape != (n, n):
        raise ValueError("B and C must be square matrices of equal size")
    if not np.any(B):
        return 0.0
    Q = _orthonormal_complement(kernel, n)
    Bp = Q.T @ B @ Q
    Cp = Q.T @ C @ Q
    Cp = 0.5 * (Cp + Cp.T)
    try:
        L = np.linalg.cholesky(Cp)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("deflated pencil matrix is not SPD") from exc
    Linv_B = scipy.linalg.solve_triangular(L, Bp, lower=True)
    S = scipy.linalg.solve_triangular(L, Linv_B.T, lower=True)
    S = 0.5 * (S + S.T)
    return float(np.linalg.eigvalsh(S)[-1])


@dataclass
class SparseFactorization:
    """Symmetric sparse LU factorization of an SPD matrix."""

    lu: spla.SuperLU
    n: int

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.n}")
        return self.lu.solve(b)


def factorize_spd(A, max_dofs: int | None = DIRECT_SOLVE_MAX_DOFS) -> SparseFactorization:
    """Factor an SPD matrix with a symmetric ordering and no off-diagonal pivoting.

    With a symmetric permutation and no pivoting, all pivots of an SPD matrix
    are positive; a non-positive pivot therefore certifies that ``A`` is not
    SPD.
    """
    A = sp.csc_matrix(A, dtype=float)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if max_dofs is not None and n > max_dofs:
        raise ConfigurationError(
            f"direct solve requested for {n} dofs; the limit is {max_dofs}"
        )
    try:
        lu = spla.splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise NotPositiveDefiniteError(f"factorization failed: {exc}") from exc
    pivots = lu.U.diagonal()
    if not np.array_equal(lu.perm_r, lu.perm_c) or np.any(pivots <= 0.0):
        raise NotPositiveDefiniteError("matrix is not symmetric positive definite")
    return SparseFactorization(lu, n)


def sparse_direct_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` for SPD ``A`` with a sparse direct factorization."""
    return factorize_spd(A).solve(b)


def extremal_eigs(A, tol: float = 1e-8, maxiter: int | None = None) -> tuple[float, float]:
    """Estimate ``(lambda_min, lambda_max)`` of an SPD matrix.

    Small matrices use a dense eigendecomposition.  Larger ones use Lanczos
    (ARPACK) for the top of the spectrum and shift-invert Lanczos around zero,
    driven by a sparse factorization, for the bottom.
    """
    A = as_operator(A)
    n = A.shape[0]
    if n > EIGS_MAX_DOFS:
        raise ConfigurationError(f"eigenvalue estimate requested for {n} > {EIGS_MAX_DOFS} dofs")
    if n <= 400:
        w = np.linalg.eigvalsh(A.toarray())
        lmin, lmax = float(w[0]), float(w[-1])
    else:
        fact = factorize_spd(A, max_dofs=None)
        opinv = spla.LinearOperator((n, n), matvec=fact.solve, dtype=float)
        try:
            lmax = float(spla.eigsh(A, k=1, which="LA", tol=tol, maxiter=maxiter,
                                    return_eigenvectors=False)[0])
            lmin = float(spla.eigsh(A, k=1, sigma=0.0, which="LM", OPinv=opinv, tol=tol,
                                    maxiter=maxiter, return_eigenvectors=False)[0])
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(
                "Lanczos did not converge", report={"partial": list(exc.eigenvalues)}
            ) from exc
    if lmin <= 0.0:
        raise NotPositiveDefiniteError(f"smallest eigenvalue {lmin:.3e} is not positive")
    return lmin, lmax


def condition_number(A, tol: float = 1e-8) -> float:
    lmin, lmax = extremal_eigs(A, tol)
    return lmax / lmin


def export_matrix_market(path, A) -> None:
    """Write ``A`` in MatrixMarket coordinate (general) format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), field="real", symmetry="general")
