"""Least-squares and l1-penalized least-squares coefficient solvers.

The penalized objective is

    (1/n) * ||y - X beta||^2 + lam * sum_j w_j |beta_j|

with ``w_j = 1`` except for an optionally exempted intercept column.  Note the
1/n (not 1/(2n)) scaling: the stationarity conditions read
``(2/n) X_j'r = lam * sign(beta_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np


@dataclass(frozen=True)
class LassoConfig:
    lam: float = 0.0
    tol: float = 1e-7
    max_sweeps: int = 10_000
    penalize_intercept: bool = True

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")

    @property
    def kkt_tol(self) -> float:
        """Stationarity tolerance certified for converged solves."""
        return 10.0 * self.tol * max(1.0, self.lam)


@dataclass
class SolveResult:
    beta: np.ndarray
    sweeps_used: int
    converged: bool
    kkt_residual: float
    rank_deficient: bool = False
    objective_trace: list = field(default_factory=list, repr=False)


def _check_problem(design, y):
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError("design must be a non-empty 2-d matrix")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError(f"outcome of length {y.shape} does not match design with {X.shape[0]} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("outcome contains non-finite values")
    return X, y


def ols_fit(design, y) -> SolveResult:
    """Least-squares coefficients; minimum-norm solution when rank deficient."""
    X, y = _check_problem(design, y)
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    return SolveResult(
        beta=beta,
        sweeps_used=0,
        converged=True,
        kkt_residual=float(np.max(np.abs(2.0 / X.shape[0] * (X.T @ (y - X @ beta))))),
        rank_deficient=bool(rank < X.shape[1]),
    )


def _penalty_weights(J: int, penalize_intercept: bool) -> np.ndarray:
    w = np.ones(J)
    if not penalize_intercept:
        w[0] = 0.0
    return w


def objective(design, y, beta, lam: float, weights=None) -> float:
    X, y = _check_problem(design, y)
    r = y - X @ beta
    w = np.ones(X.shape[1]) if weights is None else weights
    return float(r @ r / X.shape[0] + lam * np.sum(w * np.abs(beta)))


def kkt_residual(design, y, beta, lam: float, weights=None) -> float:
    """Largest violation of the lasso stationarity conditions at ``beta``."""
    X, y = _check_problem(design, y)
    n = X.shape[0]
    w = np.ones(X.shape[1]) if weights is None else np.asarray(weights)
    grad = 2.0 / n * (X.T @ (y - X @ beta))
    lw = lam * w
    active = beta != 0.0
    viol = np.where(
        active,
        np.abs(grad - lw * np.sign(beta)),
        np.maximum(np.abs(grad) - lw, 0.0),
    )
    return float(viol.max())


def lambda_max(design, y, penalize_intercept: bool = True) -> float:
    """Smallest lambda at which beta = 0 (on penalized columns) is optimal."""
    X, y = _check_problem(design, y)
    n = X.shape[0]
    r = y
    cols = slice(None)
    if not penalize_intercept:
        # unpenalized intercept is fitted first; remaining columns see residual
        a = X[:, 0] @ X[:, 0]
        r = y - X[:, 0] * (X[:, 0] @ y / a) if a > 0 else y
        cols = slice(1, None)
        if X.shape[1] == 1:
            return 0.0
    return float(2.0 / n * np.max(np.abs(X[:, cols].T @ r)))


@numba.njit(cache=True, nogil=True)
def _sweep(X, beta, r, colsq, lam, w, coords, n):
    # one cyclic pass over `coords`; returns the largest coefficient change
    max_delta = 0.0
    for j in coords:
        a = colsq[j]
        if a == 0.0:
            continue
        old = beta[j]
        rho = 0.0
        for i in range(n):
            rho += X[i, j] * r[i]
        rho = rho / n + a * old
        thr = 0.5 * lam * w[j]
        if rho > thr:
            new = (rho - thr) / a
        elif rho < -thr:
            new = (rho + thr) / a
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * delta
            beta[j] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


@numba.njit(cache=True, nogil=True)
def _objective(r, beta, lam, w, n):
    rss = 0.0
    for i in range(r.shape[0]):
        rss += r[i] * r[i]
    pen = 0.0
    for j in range(beta.shape[0]):
        pen += w[j] * abs(beta[j])
    return rss / n + lam * pen


@numba.njit(cache=True, nogil=True)
def _kkt(X, beta, r, lam, w, n):
    worst = 0.0
    for j in range(X.shape[1]):
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        g = 2.0 * g / n
        lw = lam * w[j]
        if beta[j] > 0.0:
            v = abs(g - lw)
        elif beta[j] < 0.0:
            v = abs(g + lw)
        else:
            v = abs(g) - lw
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True, nogil=True)
def _cd(X, y, beta, lam, w, tol, kkt_tol, max_sweeps, trace, record):
    n, J = X.shape
    r = y - X @ beta
    colsq = np.empty(J)
    for j in range(J):
        colsq[j] = (X[:, j] @ X[:, j]) / n
    all_coords = np.arange(J)
    sweeps = 0
    converged = False
    if record:
        trace[0] = _objective(r, beta, lam, w, n)
    while sweeps < max_sweeps:
        delta = _sweep(X, beta, r, colsq, lam, w, all_coords, n)
        sweeps += 1
        if record:
            trace[sweeps] = _objective(r, beta, lam, w, n)
        if delta < tol:
            if _kkt(X, beta, r, lam, w, n) <= kkt_tol:
                converged = True
                break
            continue
        # iterate on the current support until it settles, then re-check all
        active = np.flatnonzero(beta != 0.0)
        while sweeps < max_sweeps and active.size > 0:
            delta = _sweep(X, beta, r, colsq, lam, w, active, n)
            sweeps += 1
            if record:
                trace[sweeps] = _objective(r, beta, lam, w, n)
            if delta < tol:
                break
    return sweeps, converged


def lasso_fit(design, y, cfg: LassoConfig, beta0=None, record_objective: bool = False) -> SolveResult:
    """Cyclic coordinate descent with exact soft-threshold updates.

    Full sweeps alternate with sweeps restricted to the current support; a
    solve counts as converged only once a full sweep moves no coefficient by
    more than ``cfg.tol`` and the stationarity residual is within
    ``cfg.kkt_tol``.  Hitting ``max_sweeps`` returns ``converged=False``.
    """
    X, y = _check_problem(design, y)
    X = np.asfortranarray(X)
    J = X.shape[1]
    w = _penalty_weights(J, cfg.penalize_intercept)
    if beta0 is None:
        beta = np.zeros(J)
    else:
        beta = np.array(beta0, dtype=np.float64)
        if beta.shape != (J,):
            raise ValueError("warm start has the wrong length")
    trace = np.empty(cfg.max_sweeps + 1 if record_objective else 1)
    sweeps, converged = _cd(X, y, beta, float(cfg.lam), w, float(cfg.tol), cfg.kkt_tol,
                            int(cfg.max_sweeps), trace, record_objective)
    return SolveResult(
        beta=beta,
        sweeps_used=int(sweeps),
        converged=bool(converged),
        kkt_residual=kkt_residual(X, y, beta, cfg.lam, w),
        objective_trace=trace[: sweeps + 1].tolist() if record_objective else [],
    )


def lasso_path(design, y, lambdas, cfg: LassoConfig) -> list[SolveResult]:
    """Warm-started solutions along a strictly decreasing lambda sequence."""
    lambdas = [float(v) for v in lambdas]
    if any(v < 0 for v in lambdas):
        raise ValueError("lambdas must be non-negative")
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be strictly decreasing")
    X, y = _check_problem(design, y)
    X = np.asfortranarray(X)
    out = []
    beta = None
    for lam in lambdas:
        res = lasso_fit(X, y, LassoConfig(lam, cfg.tol, cfg.max_sweeps, cfg.penalize_intercept),
                        beta0=beta)
        out.append(res)
        beta = res.beta
    return out


def lambda_grid(lam_max: float, size: int = 50, decades: float = 3.0) -> np.ndarray:
    """Geometric grid from ``lam_max`` down ``decades`` orders of magnitude."""
    if size < 1:
        raise ValueError("grid size must be >= 1")
    if lam_max <= 0.0:
        return np.array([0.0])
    return lam_max * np.logspace(0.0, -decades, size)
