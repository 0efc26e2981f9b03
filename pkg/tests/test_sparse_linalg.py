import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from nitsche_xfem.errors import ConfigurationError, NotPositiveDefiniteError
from nitsche_xfem.sparse_linalg import (
    condition_number,
    dense_generalized_eig_max,
    export_matrix_market,
    extremal_eigs,
    factorize_spd,
    from_triplets,
    is_symmetric,
    spmv,
    triple_product,
)


def laplace_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def random_spd(rng, n):
    X = rng.standard_normal((n, n))
    return X @ X.T + n * np.eye(n)


def test_from_triplets_sums_duplicates():
    A = from_triplets([0, 0, 1], [1, 1, 0], [1.0, 2.0, 5.0], (2, 2))
    assert A[0, 1] == 3.0 and A[1, 0] == 5.0
    assert A.has_sorted_indices


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError):
        spmv(laplace_1d(4), np.ones(3))


def test_spmv_matches_dense(rng):
    A = sp.random(20, 20, density=0.2, random_state=1, format="csr")
    x = rng.standard_normal(20)
    assert np.allclose(spmv(A, x), A.toarray() @ x, rtol=0, atol=1e-14)


def test_is_symmetric():
    A = laplace_1d(5)
    assert is_symmetric(A)
    B = A.tolil()
    B[0, 1] = -1.1
    assert not is_symmetric(B.tocsr())


def test_triple_product_identity_and_dense(rng):
    A = sp.csr_matrix(random_spd(rng, 8))
    assert np.allclose(triple_product(sp.eye(8), A).toarray(), A.toarray())
    P = sp.random(8, 4, density=0.5, random_state=2, format="csr")
    C = triple_product(P, A)
    assert np.allclose(C.toarray(), P.toarray().T @ A.toarray() @ P.toarray(), atol=1e-12)
    assert is_symmetric(C, 0.0)


def test_generalized_eig_matches_scipy(rng):
    B = random_spd(rng, 5)
    C = random_spd(rng, 5)
    import scipy.linalg

    ref = scipy.linalg.eigh(B, C, eigvals_only=True)[-1]
    k = np.zeros((5, 0))
    assert dense_generalized_eig_max(B, C, k) == pytest.approx(ref, rel=1e-12)


def test_generalized_eig_deflates_kernel():
    # C = 1D Laplacian with free ends: kernel is the constant vector
    C = np.array([[1.0, -1, 0], [-1, 2, -1], [0, -1, 1]])
    B = np.diag([1.0, 0.0, 0.0])
    # on the complement of constants, lambda_max of B x = lam C x by a dense oracle
    Q = np.linalg.qr(np.column_stack([np.ones(3), np.eye(3)[:, :2]]))[0][:, 1:]
    ref = np.max(np.real(np.linalg.eigvals(np.linalg.solve(Q.T @ C @ Q, Q.T @ B @ Q))))
    assert dense_generalized_eig_max(B, C, np.ones(3)) == pytest.approx(ref, rel=1e-12)


def test_generalized_eig_zero_numerator():
    assert dense_generalized_eig_max(np.zeros((3, 3)), np.eye(3), np.zeros((3, 0))) == 0.0


def test_generalized_eig_not_spd():
    with pytest.raises(NotPositiveDefiniteError):
        dense_generalized_eig_max(np.eye(2), np.diag([1.0, -1.0]), np.zeros((2, 0)))


def test_factorize_rejects_indefinite_and_large():
    with pytest.raises(NotPositiveDefiniteError):
        factorize_spd(sp.diags([1.0, -2.0, 3.0]).tocsr())
    with pytest.raises(ConfigurationError):
        factorize_spd(laplace_1d(20), max_dofs=10)


def test_factorize_solve(rng):
    A = laplace_1d(50)
    x = rng.standard_normal(50)
    assert np.allclose(factorize_spd(A).solve(A @ x), x, atol=1e-10)


@pytest.mark.parametrize("n", [30, 600])
def test_condition_number_laplace(n):
    # closed form: eigenvalues 2 - 2 cos(k pi / (n + 1))
    k = np.arange(1, n + 1)
    lam = 2 - 2 * np.cos(k * np.pi / (n + 1))
    assert condition_number(laplace_1d(n)) == pytest.approx(lam[-1] / lam[0], rel=1e-6)
    lmin, lmax = extremal_eigs(laplace_1d(n))
    assert lmin == pytest.approx(lam[0], rel=1e-6)


def test_export_roundtrip(tmp_path):
    A = laplace_1d(6)
    path = tmp_path / "a.mtx"
    export_matrix_market(path, A)
    assert np.allclose(scipy.io.mmread(str(path)).toarray(), A.toarray())


@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_galerkin_energy_identity(n, m, seed):
    rng = np.random.default_rng(seed)
    A = sp.csr_matrix(random_spd(rng, n))
    P = sp.csr_matrix(rng.standard_normal((n, m)))
    v = rng.standard_normal(m)
    lhs = v @ (triple_product(P, A) @ v)
    rhs = (P @ v) @ (A @ (P @ v))
    assert lhs == pytest.approx(rhs, rel=1e-12)
