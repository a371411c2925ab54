"""CSR matrices and conjugate-gradient solvers for SPD and singular SPSD systems."""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.sparse as sp

from .exceptions import ConvergenceError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
COMPATIBILITY_WARN = 1e-8


class CsrMatrix:
    """Square sparse matrix in compressed-row form with sorted, unique columns."""

    def __init__(self, indptr, indices, data, n, symmetric=False):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=float)
        self.n = int(n)
        self.symmetric = symmetric
        for a in (self.indptr, self.indices, self.data):
            a.setflags(write=False)
        self._sp = sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    @classmethod
    def from_scipy(cls, A, symmetric=False):
        A = sp.csr_matrix(A, dtype=float)
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.indptr, A.indices, A.data, A.shape[0], symmetric)

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def nnz(self):
        return len(self.data)

    def spmv(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: matrix is {self.n}x{self.n}, vector has {x.shape[0]}")
        return self._sp @ x

    __matmul__ = spmv

    def diagonal(self):
        return self._sp.diagonal()

    def toarray(self):
        return self._sp.toarray()

    def to_scipy(self):
        return self._sp.copy()

    def __add__(self, other):
        return CsrMatrix.from_scipy(self._sp + other._sp, self.symmetric and other.symmetric)

    def scaled(self, alpha):
        return CsrMatrix(self.indptr, self.indices, alpha * self.data, self.n, self.symmetric)

    def symmetry_defect(self, probes=4, seed=0):
        """Max |(A u).v - (A v).u| over random probes, relative to |A|_max."""
        rng = np.random.default_rng(seed)
        scale = max(np.max(np.abs(self.data), initial=0.0), 1e-300)
        worst = 0.0
        for _ in range(probes):
            u = rng.standard_normal(self.n)
            v = rng.standard_normal(self.n)
            worst = max(worst, abs(self.spmv(u) @ v - self.spmv(v) @ u) / (scale * self.n))
        return worst


def from_triplets(n, entries, symmetric=False):
    """Build an ``n x n`` CSR matrix from ``(row, col, value)`` triplets.

    ``entries`` may be an iterable of triples or a tuple of three arrays.
    Duplicate entries are summed.
    """
    if isinstance(entries, tuple) and len(entries) == 3 and np.ndim(entries[0]) == 1:
        rows, cols, vals = (np.asarray(e) for e in entries)
    else:
        entries = list(entries)
        if entries:
            rows, cols, vals = (np.asarray(c) for c in zip(*entries))
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
    rows = rows.astype(np.int64)
    cols = cols.astype(np.int64)
    if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise IndexError(f"triplet index out of range for a {n}x{n} matrix")
    A = sp.coo_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(n, n)).tocsr()
    return CsrMatrix.from_scipy(A, symmetric)


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    compatibility_defect: float = 0.0
    compatibility_warning: bool = False

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "compatibility_defect": self.compatibility_defect,
            "compatibility_warning": self.compatibility_warning,
        }


def _as_matrix(A):
    return A if isinstance(A, CsrMatrix) else CsrMatrix.from_scipy(A)


def _cg(A, b, tol, maxit, jacobi, project):
    n = A.n
    if b.shape[0] != n:
        raise ValueError(f"dimension mismatch: matrix is {n}x{n}, right side has {b.shape[0]}")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0.0:
        return x, 0
    inv_diag = 1.0 / A.diagonal() if jacobi else None

    r = b.copy()
    z = r * inv_diag if jacobi else r
    if project:
        z = z - z.mean()
    p = z.copy()
    rz = r @ z
    target = tol * bnorm
    it = 0
    while it < maxit:
        Ap = A.spmv(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        if project:
            x -= x.mean()
        if np.linalg.norm(r) <= target:
            # guard against drift of the recursive residual
            r = b - A.spmv(x)
            if np.linalg.norm(r) <= target:
                break
        z = r * inv_diag if jacobi else r
        if project:
            z = z - z.mean()
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, it


def _finish(A, b, x, it, tol, **extra):
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(b - A.spmv(x)) / bnorm if bnorm > 0 else 0.0
    report = SolveReport(it, float(res), bool(res <= tol), **extra)
    if not report.converged:
        raise ConvergenceError(
            f"CG did not converge: residual {res:.3e} > tol {tol:.1e} after {it} iterations",
            report,
        )
    return report


def cg_solve(A, b, tol=DEFAULT_TOL, maxit=None, jacobi=False):
    """Solve the SPD system ``A x = b`` by conjugate gradients.

    Returns ``(x, SolveReport)``; raises :class:`ConvergenceError` when the
    relative residual is still above ``tol`` after ``maxit`` iterations.
    """
    A = _as_matrix(A)
    b = np.asarray(b, dtype=float)
    maxit = 10 * A.n if maxit is None else maxit
    x, it = _cg(A, b, tol, maxit, jacobi, project=False)
    return x, _finish(A, b, x, it, tol)


def cg_solve_singular(A, b, tol=DEFAULT_TOL, maxit=None, jacobi=False):
    """Mean-zero solution of ``A x = b`` where ``ker A = span{1}``.

    ``b`` is projected to mean zero first; the size of the removed component
    is reported as ``compatibility_defect`` (relative to ``|b|``) and flagged
    when it exceeds 1e-8.
    """
    A = _as_matrix(A)
    b = np.asarray(b, dtype=float)
    maxit = 10 * A.n if maxit is None else maxit
    b_proj = b - b.mean()
    bnorm = np.linalg.norm(b)
    defect = float(np.linalg.norm(b - b_proj) / bnorm) if bnorm > 0 else 0.0
    warn = defect > COMPATIBILITY_WARN
    if warn:
        log.warning("right side violates compatibility: relative defect %.3e", defect)
    x, it = _cg(A, b_proj, tol, maxit, jacobi, project=True)
    x -= x.mean()
    report = _finish(A, b_proj, x, it, tol, compatibility_defect=defect,
                     compatibility_warning=warn)
    return x, report
