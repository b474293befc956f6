"""Warm-started preconditioned Krylov solvers for sparse SPD systems.

Preconditioners: identity, Jacobi and IC(0), the zero-fill incomplete
Cholesky factorization. Solvers: CG and MINRES, both stopping on the true
relative residual ``|b - A x| / |b|`` after a minimum number of iterations.
"""

import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    """Raised when an inner solver detects a non-SPD system or breaks down."""


@numba.njit(cache=True)
def _ic0_csr(n, indptr, indices, data):
    # Lower-triangular CSR input (sorted columns, diagonal last in each row).
    # Row-oriented IC(0): L[i,j] = (A[i,j] - sum_k<j L[i,k] L[j,k]) / L[j,j]
    # restricted to the sparsity pattern of A.
    L = data.copy()
    diag_pos = np.empty(n, dtype=np.int64)
    for i in range(n):
        diag_pos[i] = indptr[i + 1] - 1
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        for p in range(start, end):
            j = indices[p]
            s = L[p]
            # sparse dot of row i (cols < j) with row j (cols < j)
            a, b = start, indptr[j]
            bend = indptr[j + 1] - 1
            while a < p and b < bend:
                ca, cb = indices[a], indices[b]
                if ca == cb:
                    s -= L[a] * L[b]
                    a += 1
                    b += 1
                elif ca < cb:
                    a += 1
                else:
                    b += 1
            if j == i:
                if s <= 0.0:
                    return L, False
                L[p] = np.sqrt(s)
            else:
                L[p] = s / L[diag_pos[j]]
    return L, True


@numba.njit(cache=True)
def _lower_solve(n, indptr, indices, data, b):
    x = b.copy()
    for i in range(n):
        s = x[i]
        end = indptr[i + 1] - 1
        for p in range(indptr[i], end):
            s -= data[p] * x[indices[p]]
        x[i] = s / data[end]
    return x


@numba.njit(cache=True)
def _upper_solve_transposed(n, indptr, indices, data, b):
    # Solves L^T x = b with L stored as lower CSR.
    x = b.copy()
    for i in range(n - 1, -1, -1):
        end = indptr[i + 1] - 1
        x[i] = x[i] / data[end]
        xi = x[i]
        for p in range(indptr[i], end):
            x[indices[p]] -= data[p] * xi
    return x


class IdentityPreconditioner:
    name = "none"

    def __call__(self, r):
        return r


class JacobiPreconditioner:
    name = "jacobi"

    def __init__(self, A):
        d = A.diagonal()
        if np.any(d <= 0):
            raise SolverError("Jacobi preconditioner needs a positive diagonal")
        self.inv_diag = 1.0 / d

    def __call__(self, r):
        return self.inv_diag * r


class IC0Preconditioner:
    """Incomplete Cholesky with zero fill-in; applies ``(L L^T)^{-1}``.

    If the factorization meets a nonpositive pivot the diagonal is shifted by
    a growing multiple of its mean until it succeeds.
    """

    name = "ic0"

    def __init__(self, A, max_shifts=20):
        low = sp.tril(sp.csr_matrix(A), format="csr")
        low.sort_indices()
        n = low.shape[0]
        if np.any(low.diagonal() <= 0):
            raise SolverError("IC(0) needs a positive diagonal")
        self.shift = 0.0
        base = low.diagonal().mean()
        for k in range(max_shifts + 1):
            work = low if self.shift == 0 else (low + self.shift * sp.identity(n)).tocsr()
            work.sort_indices()
            data, ok = _ic0_csr(n, work.indptr.astype(np.int64),
                                work.indices.astype(np.int64), work.data.astype(float))
            if ok:
                break
            self.shift = base * 1e-3 * 2.0 ** k
        else:
            raise SolverError("IC(0) factorization failed")
        self.n = n
        self.indptr = work.indptr.astype(np.int64)
        self.indices = work.indices.astype(np.int64)
        self.data = data

    def __call__(self, r):
        y = _lower_solve(self.n, self.indptr, self.indices, self.data, np.ascontiguousarray(r))
        return _upper_solve_transposed(self.n, self.indptr, self.indices, self.data, y)


def make_preconditioner(A, kind):
    kind = (kind or "none").lower()
    if kind == "none":
        return IdentityPreconditioner()
    if kind == "jacobi":
        return JacobiPreconditioner(A)
    if kind in ("ic0", "ic(0)"):
        return IC0Preconditioner(A)
    raise ValueError(f"unknown preconditioner {kind!r}")


@dataclass
class SolveInfo:
    """Outcome of one Krylov solve."""

    iterations: int
    converged: bool
    residuals: list = field(default_factory=list)
    times: list = field(default_factory=list)

    @property
    def relative_residual(self):
        return self.residuals[-1] if self.residuals else np.nan


def _as_operator(A):
    if callable(A) and not sp.issparse(A) and not isinstance(A, np.ndarray):
        return A
    return lambda x: A @ x


def cg(A, b, x0=None, M=None, tol=1e-6, min_iters=0, max_iters=1000):
    """Preconditioned conjugate gradients from a warm start."""
    matvec = _as_operator(A)
    M = M or IdentityPreconditioner()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    t0 = time.perf_counter()
    if bnorm == 0:
        return np.zeros_like(b), SolveInfo(0, True, [0.0], [0.0])
    r = b - matvec(x)
    info = SolveInfo(0, False, [np.linalg.norm(r) / bnorm], [0.0])
    z = M(r)
    d = z.copy()
    rz = r @ z
    for k in range(1, max_iters + 1):
        if info.residuals[-1] <= tol and k > min_iters:
            info.converged = True
            break
        Ad = matvec(d)
        dAd = d @ Ad
        if dAd <= 0:
            if info.residuals[-1] == 0:
                info.converged = True
                break
            raise SolverError("CG detected a matrix that is not positive definite")
        a = rz / dAd
        x += a * d
        r -= a * Ad
        info.iterations = k
        info.residuals.append(np.linalg.norm(r) / bnorm)
        info.times.append(time.perf_counter() - t0)
        z = M(r)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    else:
        info.converged = info.residuals[-1] <= tol
    return x, info


def minres(A, b, x0=None, M=None, tol=1e-6, min_iters=0, max_iters=1000):
    """Preconditioned MINRES (Paige-Saunders recurrences) from a warm start.

    Minimizes the ``M^{-1}``-norm of the residual; the stopping test uses the
    true residual computed by a recurrence-free update of ``r``.
    """
    matvec = _as_operator(A)
    M = M or IdentityPreconditioner()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    t0 = time.perf_counter()
    if bnorm == 0:
        return np.zeros_like(b), SolveInfo(0, True, [0.0], [0.0])
    r = b - matvec(x)
    info = SolveInfo(0, False, [np.linalg.norm(r) / bnorm], [0.0])
    if info.residuals[-1] <= tol and min_iters == 0:
        info.converged = True
        return x, info

    y = M(r)
    beta1 = r @ y
    if beta1 < 0:
        raise SolverError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    r1, r2 = r.copy(), r.copy()
    oldb, beta, dbar, epsln = 0.0, beta1, 0.0, 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros_like(b)
    w2 = np.zeros_like(b)
    for k in range(1, max_iters + 1):
        if beta == 0:
            break
        s = 1.0 / beta
        v = s * y
        y = matvec(v)
        if k >= 2:
            y = y - (beta / oldb) * r1
        alfa = v @ y
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        y = M(r2)
        oldb, beta = beta, r2 @ y
        if beta < 0:
            raise SolverError("preconditioner is not positive definite")
        beta = np.sqrt(beta)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x += phi * w
        info.iterations = k
        rel = np.linalg.norm(b - matvec(x)) / bnorm
        info.residuals.append(rel)
        info.times.append(time.perf_counter() - t0)
        if rel <= tol and k >= min_iters:
            info.converged = True
            break
    else:
        info.converged = info.residuals[-1] <= tol
    return x, info


_SOLVERS = {"cg": cg, "minres": minres}


class SparseSpdSystem:
    """Explicit sparse SPD matrix plus a cached preconditioner.

    The matrix stays fixed while right-hand sides change, so the
    preconditioner is built once.
    """

    def __init__(self, matrix, preconditioner="none", solver="cg"):
        A = sp.csr_matrix(matrix)
        if A.shape[0] != A.shape[1]:
            raise ValueError("system matrix must be square")
        asym = abs(A - A.T).max() if A.nnz else 0.0
        scale = abs(A).max() if A.nnz else 1.0
        if asym > 1e-12 * max(scale, 1.0):
            raise SolverError(f"system matrix is not symmetric (max asymmetry {asym:.3g})")
        self.matrix = A
        if solver not in _SOLVERS:
            raise ValueError(f"unknown solver {solver!r}")
        self.solver = solver
        self.preconditioner = make_preconditioner(A, preconditioner)

    def solve(self, rhs, x0=None, tol=1e-6, min_iters=0, max_iters=1000):
        return _SOLVERS[self.solver](self.matrix, rhs, x0=x0, M=self.preconditioner,
                                     tol=tol, min_iters=min_iters, max_iters=max_iters)


def solve_spd(system, rhs, x0=None, tol=1e-6, min_iters=3, max_iters=1000):
    """Solve ``system.matrix x = rhs``; returns ``(x, SolveInfo)``."""
    return system.solve(rhs, x0=x0, tol=tol, min_iters=min_iters, max_iters=max_iters)
