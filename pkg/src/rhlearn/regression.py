"""Leave-one-out sample regressions (LASSO for L1H, ridge for L2H).

Both objectives use the scaling ``||y - A c||^2 + beta * penalty(c)`` with no
1/2 or 1/d factor.  The LASSO solver is cyclic coordinate descent with
soft-thresholding, run on the Gram form ``G = A^T A``, ``b = A^T y``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numba
import numpy as np
from scipy import linalg


class RegressionError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionConfig:
    model: Literal["l1", "l2"] = "l2"
    beta: float = 1e-3
    tol: float = 1e-7
    max_iter: int = 10000
    normalize_columns: bool = True

    def __post_init__(self):
        if self.model not in ("l1", "l2"):
            raise RegressionError(f"model must be 'l1' or 'l2', got {self.model!r}")
        if not self.beta > 0:
            raise RegressionError("beta must be > 0")
        if not self.tol > 0:
            raise RegressionError("tol must be > 0")
        if self.max_iter < 1:
            raise RegressionError("max_iter must be >= 1")


class LassoResult(NamedTuple):
    coef: np.ndarray
    converged: bool
    n_iter: int
    objective: np.ndarray  # per-sweep objective, empty unless tracked


@dataclass(frozen=True)
class CoefficientMatrix:
    """``coeffs[j, i]`` is the weight of sample j when regressing sample i."""

    coeffs: np.ndarray
    converged: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise RegressionError("inputs must be finite")


def _ridge_gram(G: np.ndarray, b: np.ndarray, beta: float) -> np.ndarray:
    K = G + beta * np.eye(G.shape[0])
    return linalg.cho_solve(linalg.cho_factor(K, lower=True, check_finite=False),
                            b, check_finite=False)


def solve_ridge(A: np.ndarray, y: np.ndarray, beta: float) -> np.ndarray:
    """Minimize ``||y - A c||^2 + beta ||c||^2`` through the p x p normal equations."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_finite(A, y)
    if not beta > 0:
        raise RegressionError("beta must be > 0")
    return _ridge_gram(A.T @ A, A.T @ y, beta)


@numba.njit(cache=True, nogil=True)
def _lasso_cd(G, b, yy, beta, tol, max_iter, history):
    p = b.shape[0]
    c = np.zeros(p)
    q = b.copy()  # A^T (y - A c)
    half = 0.5 * beta
    track = history.shape[0] > 0
    for sweep in range(max_iter):
        max_change = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = c[j]
            rho = q[j] + gjj * old
            if rho > half:
                new = (rho - half) / gjj
            elif rho < -half:
                new = (rho + half) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                c[j] = new
                for k in range(p):
                    q[k] -= G[k, j] * delta
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if track:
            # ||y - Ac||^2 = yy - 2 b.c + c.G.c = yy - b.c - q.c
            obj = yy
            for k in range(p):
                obj -= (b[k] + q[k]) * c[k]
                obj += beta * abs(c[k])
            history[sweep] = obj
        if max_change <= tol:
            return c, sweep + 1, True
    return c, max_iter, False


def _lasso_gram(G, b, yy, beta, tol, max_iter, track=False) -> LassoResult:
    history = np.empty(max_iter if track else 0)
    c, n_iter, ok = _lasso_cd(np.ascontiguousarray(G), np.ascontiguousarray(b),
                              float(yy), float(beta), float(tol), int(max_iter), history)
    return LassoResult(c, bool(ok), int(n_iter), history[:n_iter] if track else history)


def solve_lasso(A: np.ndarray, y: np.ndarray, beta: float, tol: float = 1e-7,
                max_iter: int = 10000, track_objective: bool = False) -> LassoResult:
    """Minimize ``||y - A c||^2 + beta ||c||_1`` by cyclic coordinate descent.

    Stops once the largest coefficient change in a sweep is ``<= tol``.  Columns
    of zero norm are skipped and keep a zero coefficient.  When ``max_iter``
    sweeps run out, the current iterate is returned with ``converged=False``.
    ``track_objective`` records the objective after every sweep.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_finite(A, y)
    if not beta > 0:
        raise RegressionError("beta must be > 0")
    if A.ndim == 1:
        A = A[:, None]
    return _lasso_gram(A.T @ A, A.T @ y, y @ y, beta, tol, max_iter, track_objective)


def lasso_objective(A, y, c, beta) -> float:
    r = y - A @ c
    return float(r @ r + beta * np.abs(c).sum())


def kkt_violation(A, y, c, beta) -> float:
    """Largest KKT residual of ``||y - A c||^2 + beta ||c||_1`` at ``c``."""
    g = 2.0 * A.T @ (y - A @ c)
    nz = c != 0
    viol = np.where(nz, np.abs(g - beta * np.sign(c)), np.maximum(np.abs(g) - beta, 0.0))
    return float(viol.max(initial=0.0))


def normalize_columns(X: np.ndarray) -> np.ndarray:
    """Scale columns to unit L2 norm; zero columns stay zero."""
    norms = np.linalg.norm(X, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    return X / scale


def leave_one_out_coefficients(X: np.ndarray, cfg: RegressionConfig,
                               n_jobs: int = 1) -> CoefficientMatrix:
    """Regress every sample on all the others.

    Column i of the result holds the coefficients of target i scattered back
    to rows j != i; the diagonal is zero.  Solves are independent and run on
    ``n_jobs`` threads.
    """
    X = np.asarray(X, dtype=float)
    _check_finite(X)
    n = X.shape[1]
    if n < 2:
        raise RegressionError("leave-one-out regression needs at least 2 samples")
    if cfg.normalize_columns:
        X = normalize_columns(X)
    gram = X.T @ X
    gram.setflags(write=False)
    coeffs = np.zeros((n, n))
    converged = np.ones(n, dtype=bool)
    all_idx = np.arange(n)

    def solve(i):
        others = np.delete(all_idx, i)
        G = gram[np.ix_(others, others)]
        b = gram[others, i]
        try:
            if cfg.model == "l2":
                coef, ok = _ridge_gram(G, b, cfg.beta), True
            else:
                res = _lasso_gram(G, b, gram[i, i], cfg.beta, cfg.tol, cfg.max_iter)
                coef, ok = res.coef, res.converged
        except Exception as exc:
            raise RegressionError(f"regression of sample {i} failed: {exc}") from exc
        coeffs[others, i] = coef
        converged[i] = ok

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(solve, range(n)))
    else:
        for i in range(n):
            solve(i)
    return CoefficientMatrix(coeffs, converged)
