"""Sparse symmetric storage and preconditioned conjugate gradients.

The incomplete Cholesky factor keeps exactly the sparsity pattern of the
lower triangle of A (IC(0), no fill-in). Factorisation and the triangular
sweeps are compiled with numba; everything else is plain numpy/scipy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

log = logging.getLogger(__name__)

JACOBI = "jacobi"
INCOMPLETE_CHOLESKY = "incompleteCholesky"
PRECONDITIONERS = (JACOBI, INCOMPLETE_CHOLESKY)


class SparseSymmetricMatrix:
    """Symmetric matrix stored as its diagonal plus each off-diagonal pair once.

    ``upper_rows[k] < upper_cols[k]`` and ``A[r, c] = A[c, r] = upper_values[k]``.
    """

    def __init__(self, diag, upper_rows, upper_cols, upper_values):
        self.diag = np.ascontiguousarray(diag, dtype=float)
        rows = np.asarray(upper_rows, dtype=np.int64)
        cols = np.asarray(upper_cols, dtype=np.int64)
        if np.any(rows >= cols):
            raise ValueError("off-diagonal entries must be given with row < column")
        self.upper_rows = rows
        self.upper_cols = cols
        self.upper_values = np.ascontiguousarray(upper_values, dtype=float)
        self._csr = None
        self._lower = None

    @property
    def n(self) -> int:
        return len(self.diag)

    @classmethod
    def from_dense(cls, A) -> "SparseSymmetricMatrix":
        A = np.asarray(A, dtype=float)
        if not np.array_equal(A, A.T):
            raise ValueError("matrix is not symmetric")
        r, c = np.nonzero(np.triu(A, 1))
        return cls(np.diag(A).copy(), r, c, A[r, c])

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            n = self.n
            r = np.concatenate([np.arange(n), self.upper_rows, self.upper_cols])
            c = np.concatenate([np.arange(n), self.upper_cols, self.upper_rows])
            v = np.concatenate([self.diag, self.upper_values, self.upper_values])
            self._csr = sp.csr_matrix((v, (r, c)), shape=(n, n))
            self._csr.sum_duplicates()
        return self._csr

    def lower_csr(self):
        """Strict lower triangle as ``(indptr, indices, data)`` with sorted columns."""
        if self._lower is None:
            L = sp.csr_matrix((self.upper_values, (self.upper_cols, self.upper_rows)),
                              shape=(self.n, self.n))
            L.sum_duplicates()
            L.sort_indices()
            self._lower = (L.indptr.astype(np.int64), L.indices.astype(np.int64),
                           L.data.astype(float))
        return self._lower

    def matvec(self, x) -> np.ndarray:
        return self.to_csr() @ np.asarray(x, dtype=float)

    __matmul__ = matvec

    def dense(self) -> np.ndarray:
        return self.to_csr().toarray()


@dataclass
class SolveStats:
    iterations: int = 0
    initial_residual: float = 0.0
    final_residual: float = 0.0
    converged: bool = False
    preconditioner: str = ""
    warnings: list[str] = field(default_factory=list)


@njit(cache=True)
def _ic0_factor(n, indptr, indices, data, diag):
    L = np.empty_like(data)
    d = np.empty(n)
    for i in range(n):
        row_end = indptr[i + 1]
        for p in range(indptr[i], row_end):
            j = indices[p]
            s = data[p]
            pi = indptr[i]
            pj = indptr[j]
            pj_end = indptr[j + 1]
            while pi < p and pj < pj_end:
                ki = indices[pi]
                kj = indices[pj]
                if ki == kj:
                    s -= L[pi] * L[pj]
                    pi += 1
                    pj += 1
                elif ki < kj:
                    pi += 1
                else:
                    pj += 1
            L[p] = s / d[j]
        s = diag[i]
        for p in range(indptr[i], row_end):
            s -= L[p] * L[p]
        if not s > 0.0:
            return L, d, i
        d[i] = math.sqrt(s)
    return L, d, -1


@njit(cache=True)
def _ic0_apply(n, indptr, indices, L, d, r):
    y = np.empty(n)
    for i in range(n):
        s = r[i]
        for p in range(indptr[i], indptr[i + 1]):
            s -= L[p] * y[indices[p]]
        y[i] = s / d[i]
    for i in range(n - 1, -1, -1):
        zi = y[i] / d[i]
        y[i] = zi
        for p in range(indptr[i], indptr[i + 1]):
            y[indices[p]] -= L[p] * zi
    return y


class IncompleteCholeskyBreakdown(ArithmeticError):
    pass


class IncompleteCholesky:
    """IC(0) preconditioner: A ~ L L^T on A's own sparsity pattern."""

    name = INCOMPLETE_CHOLESKY

    def __init__(self, A: SparseSymmetricMatrix):
        indptr, indices, data = A.lower_csr()
        L, d, bad = _ic0_factor(A.n, indptr, indices, data, A.diag)
        if bad >= 0:
            raise IncompleteCholeskyBreakdown(f"non-positive pivot in row {bad}")
        self._n = A.n
        self._indptr, self._indices = indptr, indices
        self.L, self.d = L, d

    def apply(self, r: np.ndarray) -> np.ndarray:
        return _ic0_apply(self._n, self._indptr, self._indices, self.L, self.d,
                          np.ascontiguousarray(r, dtype=float))


class Jacobi:
    name = JACOBI

    def __init__(self, A: SparseSymmetricMatrix):
        if np.any(A.diag <= 0):
            raise ValueError("Jacobi preconditioner needs a positive diagonal")
        self.inv_diag = 1.0 / A.diag

    def apply(self, r: np.ndarray) -> np.ndarray:
        return self.inv_diag * r


def make_preconditioner(A: SparseSymmetricMatrix, kind: str = INCOMPLETE_CHOLESKY,
                        warnings: list[str] | None = None):
    """Build the requested preconditioner, falling back to Jacobi on IC breakdown."""
    if kind == JACOBI:
        return Jacobi(A)
    if kind != INCOMPLETE_CHOLESKY:
        raise ValueError(f"unknown preconditioner {kind!r}; choose from {PRECONDITIONERS}")
    try:
        return IncompleteCholesky(A)
    except IncompleteCholeskyBreakdown as exc:
        msg = f"incomplete Cholesky failed ({exc}); falling back to Jacobi"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
        return Jacobi(A)


def residual_norm(A: SparseSymmetricMatrix, x, b, norm: str = "l2") -> float:
    r = np.asarray(b, dtype=float) - A.matvec(x)
    if norm == "l2":
        return float(np.linalg.norm(r))
    if norm == "l1":
        return float(np.abs(r).sum())
    raise ValueError(f"unknown norm {norm!r}")


def cg_solve(A: SparseSymmetricMatrix, b, x0=None, rel_tol: float = 0.1,
             max_iter: int = 1000, precond=INCOMPLETE_CHOLESKY):
    """Preconditioned conjugate gradients.

    Iterates until ``||b - A x|| <= rel_tol * ||b - A x0||`` (2-norm) or
    ``max_iter`` iterations. ``precond`` is a preconditioner name or an
    already-built preconditioner object (reused across solves).

    Returns ``(x, SolveStats)``.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros(A.n) if x0 is None else np.array(x0, dtype=float)
    stats = SolveStats()
    M = make_preconditioner(A, precond, stats.warnings) if isinstance(precond, str) else precond
    stats.preconditioner = M.name

    r = b - A.matvec(x)
    r0 = float(np.linalg.norm(r))
    stats.initial_residual = stats.final_residual = r0
    if r0 == 0.0:
        stats.converged = True
        return x, stats
    target = rel_tol * r0

    z = M.apply(r)
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        Ap = A.matvec(p)
        pAp = float(p @ Ap)
        if not pAp > 0:
            stats.warnings.append(f"non-positive curvature p.Ap = {pAp:.3g}")
            stats.iterations = k - 1
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        stats.iterations = k
        res = float(np.linalg.norm(r))
        if res <= target:
            # Guard against drift of the recurrence residual.
            r = b - A.matvec(x)
            res = float(np.linalg.norm(r))
            if res <= target:
                stats.final_residual = res
                stats.converged = True
                return x, stats
        stats.final_residual = res
        z = M.apply(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    stats.final_residual = float(np.linalg.norm(b - A.matvec(x)))
    stats.converged = stats.final_residual <= target
    return x, stats
