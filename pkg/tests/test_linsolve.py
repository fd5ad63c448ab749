import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from fvsolid.linsolve import (
    INCOMPLETE_CHOLESKY, JACOBI, IncompleteCholesky, Jacobi, SparseSymmetricMatrix, cg_solve,
    make_preconditioner, residual_norm,
)


def random_spd(n, rng, density=0.3):
    """Sparse diagonally dominant SPD matrix D + L + L^T."""
    A = np.zeros((n, n))
    mask = np.triu(rng.random((n, n)) < density, 1)
    A[mask] = -rng.random(mask.sum())
    A = A + A.T
    A[np.diag_indices(n)] = np.abs(A).sum(axis=1) + rng.uniform(0.1, 1.0, n)
    return A


def tridiagonal(n):
    A = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return A


def test_tridiagonal_oracle():
    A = SparseSymmetricMatrix.from_dense(tridiagonal(3))
    for kind in (JACOBI, INCOMPLETE_CHOLESKY):
        x, stats = cg_solve(A, [1.0, 0.0, 0.0], rel_tol=1e-14, precond=kind)
        assert_allclose(x, [0.75, 0.5, 0.25], rtol=1e-13)
        assert stats.converged
        assert stats.preconditioner == kind


def test_ic0_is_exact_on_tridiagonal():
    # No fill-in on a tridiagonal matrix, so IC(0) is the full Cholesky factor
    # and PCG converges in one iteration.
    A = SparseSymmetricMatrix.from_dense(tridiagonal(12))
    x, stats = cg_solve(A, np.ones(12), rel_tol=1e-12)
    assert stats.iterations == 1
    assert_allclose(A.dense() @ x, np.ones(12), atol=1e-12)


@pytest.mark.parametrize("kind", [JACOBI, INCOMPLETE_CHOLESKY])
def test_random_spd_matches_dense(kind):
    rng = np.random.default_rng(20)
    A = random_spd(20, rng)
    b = rng.normal(size=20)
    x, stats = cg_solve(SparseSymmetricMatrix.from_dense(A), b, rel_tol=1e-13, precond=kind)
    ref = np.linalg.solve(A, b)
    assert np.linalg.norm(x - ref) <= 1e-9 * np.linalg.norm(ref)
    assert stats.final_residual <= 1e-13 * stats.initial_residual


@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_matvec_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    A = random_spd(n, rng, density=0.5)
    x = rng.normal(size=n)
    S = SparseSymmetricMatrix.from_dense(A)
    ref = A @ x
    assert np.abs(S @ x - ref).max() <= 1e-13 * (np.abs(A) @ np.abs(x)).max()
    assert_array_equal(S.dense(), A)


@given(st.integers(2, 30), st.integers(0, 2**32 - 1), st.floats(1e-8, 0.5))
@settings(max_examples=30, deadline=None)
def test_converged_means_relative_drop(n, seed, tol):
    rng = np.random.default_rng(seed)
    S = SparseSymmetricMatrix.from_dense(random_spd(n, rng))
    b = rng.normal(size=n)
    x0 = rng.normal(size=n)
    for kind in (JACOBI, INCOMPLETE_CHOLESKY):
        x, stats = cg_solve(S, b, x0=x0, rel_tol=tol, precond=kind)
        assert stats.converged
        assert stats.final_residual <= tol * stats.initial_residual
        assert_allclose(stats.final_residual, residual_norm(S, x, b), rtol=1e-12, atol=1e-300)


def test_zero_rhs_returns_immediately():
    S = SparseSymmetricMatrix.from_dense(tridiagonal(4))
    x, stats = cg_solve(S, np.zeros(4))
    assert stats.iterations == 0 and stats.converged
    assert_array_equal(x, 0.0)


def test_residual_norms():
    S = SparseSymmetricMatrix.from_dense(np.diag([1.0, 2.0]))
    assert_allclose(residual_norm(S, [1.0, 1.0], [2.0, 4.0]), np.sqrt(5.0))
    assert_allclose(residual_norm(S, [1.0, 1.0], [2.0, 4.0], norm="l1"), 3.0)
    with pytest.raises(ValueError):
        residual_norm(S, [1.0, 1.0], [2.0, 4.0], norm="max")


def test_ic_breakdown_falls_back_to_jacobi():
    # Symmetric with a positive diagonal but indefinite: the second pivot is 1 - 4 < 0.
    S = SparseSymmetricMatrix.from_dense([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ArithmeticError):
        IncompleteCholesky(S)
    warnings = []
    M = make_preconditioner(S, INCOMPLETE_CHOLESKY, warnings)
    assert isinstance(M, Jacobi)
    assert warnings and "Jacobi" in warnings[0]


def test_preconditioner_application():
    rng = np.random.default_rng(3)
    A = random_spd(8, rng, density=1.0)
    S = SparseSymmetricMatrix.from_dense(A)
    M = IncompleteCholesky(S)
    # Dense pattern: IC(0) equals the full Cholesky factorisation, so M^-1 = A^-1.
    r = rng.normal(size=8)
    assert_allclose(M.apply(r), np.linalg.solve(A, r), rtol=1e-12)
    assert_allclose(Jacobi(S).apply(r), r / np.diag(A), rtol=1e-15)


def test_rejects_lower_entries():
    with pytest.raises(ValueError):
        SparseSymmetricMatrix([1.0, 1.0], [1], [0], [0.5])
    with pytest.raises(ValueError):
        SparseSymmetricMatrix.from_dense([[1.0, 0.5], [0.4, 1.0]])


def test_unknown_preconditioner():
    S = SparseSymmetricMatrix.from_dense(np.eye(2))
    with pytest.raises(ValueError):
        cg_solve(S, np.ones(2), precond="multigrid")


def test_deterministic():
    rng = np.random.default_rng(5)
    S = SparseSymmetricMatrix.from_dense(random_spd(30, rng))
    b = rng.normal(size=30)
    x1, s1 = cg_solve(S, b, rel_tol=1e-10)
    x2, s2 = cg_solve(S, b, rel_tol=1e-10)
    assert_array_equal(x1, x2)
    assert s1.iterations == s2.iterations


def test_max_iter_reports_not_converged():
    rng = np.random.default_rng(7)
    S = SparseSymmetricMatrix.from_dense(random_spd(40, rng, density=0.5))
    x, stats = cg_solve(S, rng.normal(size=40), rel_tol=1e-14, max_iter=1, precond=JACOBI)
    assert stats.iterations == 1
    assert not stats.converged
