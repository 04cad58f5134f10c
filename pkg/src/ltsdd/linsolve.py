"""Sparse direct factorizations and a matrix-free GMRES."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import SingularMatrix

Operator = Callable[[np.ndarray], np.ndarray]

REORTH_THRESHOLD = 1e-8


def as_sparse(rows, cols, vals, shape) -> sps.csc_matrix:
    """Assemble COO triplets; duplicate entries are summed."""
    A = sps.coo_matrix((vals, (rows, cols)), shape=shape).tocsc()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


class Factorization:
    """LU factors of a square sparse matrix, reusable for many right-hand sides."""

    def __init__(self, A):
        A = sps.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.shape = A.shape
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = self._lu.solve(np.asarray(b, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SingularMatrix("non-finite solution; matrix is numerically singular")
        return x


def lu_factor(A) -> Factorization:
    return Factorization(A)


def lu_solve(F: Factorization, b: np.ndarray) -> np.ndarray:
    return F.solve(b)


@dataclass
class KrylovReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    subdomain_solve_count: int = 0


def _givens(a: float, b: float):
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def gmres(
    apply: Operator,
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tol: float = 1e-6,
    max_iter: int = 500,
    precond: Optional[Operator] = None,
    restart: Optional[int] = None,
    weights: Optional[np.ndarray] = None,
    callback: Optional[Callable[[int, float], None]] = None,
):
    """Left-preconditioned GMRES for ``precond(apply(x)) = precond(b)``.

    Convergence is declared when ``|M(b - A x_k)| / |M b| <= tol`` (relative to
    the initial residual when b vanishes). ``weights`` defines a diagonal inner
    product ``<u, v> = sum(w u v)``. Without ``restart`` the Krylov basis is
    kept for the whole run.

    Returns ``(x, KrylovReport)``; hitting ``max_iter`` is reported through
    ``converged=False``, not raised.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    sw = np.ones(n) if weights is None else np.sqrt(np.asarray(weights, dtype=float))
    M = precond if precond is not None else (lambda v: v)

    def op(y):
        return sw * M(apply(y / sw))

    report = KrylovReport()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    warm = x0 is not None and np.any(x != 0)

    Mb = sw * M(b) if (precond is not None or not warm) else sw * b
    r = sw * M(b - apply(x)) if warm else Mb.copy()
    beta = float(np.linalg.norm(r))
    ref = float(np.linalg.norm(Mb))
    if ref == 0.0:
        ref = beta
    if beta == 0.0:
        report.residual_history.append(0.0)
        report.converged = True
        return x, report
    report.residual_history.append(beta / ref)
    if beta / ref <= tol:
        report.converged = True
        return x, report

    y_total = sw * x
    while report.iterations < max_iter:
        m = min(restart or max_iter, max_iter - report.iterations)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[0] = r / beta
        g[0] = beta
        k = 0
        done = False
        for j in range(m):
            w = op(V[j])
            for i in range(j + 1):
                hij = V[i] @ w
                H[i, j] += hij
                w -= hij * V[i]
            nw = float(np.linalg.norm(w))
            if nw > 0.0 and np.max(np.abs(V[: j + 1] @ w)) > REORTH_THRESHOLD * nw:
                for i in range(j + 1):
                    hij = V[i] @ w
                    H[i, j] += hij
                    w -= hij * V[i]
                nw = float(np.linalg.norm(w))
            H[j + 1, j] = nw
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            report.iterations += 1
            k = j + 1
            rel = abs(g[j + 1]) / ref
            report.residual_history.append(rel)
            if callback is not None:
                callback(report.iterations, rel)
            if rel <= tol:
                report.converged = True
                done = True
                break
            if nw <= 1e-14 * beta:
                done = True
                break
            V[j + 1] = w / nw
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
        y_total = y_total + V[:k].T @ y
        if done or report.iterations >= max_iter:
            break
        r = sw * M(b - apply(y_total / sw))
        beta = float(np.linalg.norm(r))
        if beta / ref <= tol:
            report.converged = True
            break
    return y_total / sw, report
