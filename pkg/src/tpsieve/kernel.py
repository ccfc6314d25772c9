"""Kernel ridge regression with the first-order Sobolev product kernel.

The univariate kernel of W_1([0, 1]) (inner product <f,g> + <f',g'>) is

    k(s, t) = cosh(min(s, t)) * cosh(1 - max(s, t)) / sinh(1)

and its Mercer expansion in the cosine system has eigenvalues
1 / (1 + ((j - 1) pi)^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .basis import basis_table
from .design import check_features

_SINH1 = math.sinh(1.0)


class GramSolveError(np.linalg.LinAlgError):
    """Cholesky factorization of the regularized Gram matrix failed."""


def _check_unit(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError("kernel arguments must lie in [0, 1]")


def w1_kernel(s, t):
    """Reproducing kernel of W_1([0, 1]); broadcasts over array inputs."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    _check_unit(s, t)
    out = np.cosh(np.minimum(s, t)) * np.cosh(1.0 - np.maximum(s, t)) / _SINH1
    return float(out) if out.ndim == 0 else out


def mercer_eigenvalues(J: int) -> np.ndarray:
    j = np.arange(1, J + 1, dtype=np.float64)
    return 1.0 / (1.0 + ((j - 1.0) * np.pi) ** 2)


def mercer_kernel(s, t, J: int = 10_000):
    """Truncated expansion sum_{j<=J} lambda_j phi_j(s) phi_j(t)."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    lam = mercer_eigenvalues(J)
    return np.sum(lam * basis_table("cosine", J, s) * basis_table("cosine", J, t), axis=-1)


def _dims(d: int, active_dims: Optional[Sequence[int]]) -> np.ndarray:
    if active_dims is None:
        return np.arange(d)
    dims = np.asarray(sorted(set(int(k) for k in active_dims)), dtype=np.int64)
    if dims.size == 0 or dims[0] < 0 or dims[-1] >= d:
        raise ValueError(f"active_dims {list(active_dims)} not a subset of 0..{d - 1}")
    return dims


def product_kernel(x, z, active_dims: Optional[Sequence[int]] = None) -> float:
    """prod_k k(x^k, z^k) over ``active_dims`` (0-based; all when None)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    if x.shape != z.shape:
        raise ValueError("points must have the same dimension")
    dims = _dims(x.size, active_dims)
    return float(np.prod(w1_kernel(x[dims], z[dims])))


def gram(A, B=None, active_dims: Optional[Sequence[int]] = None) -> np.ndarray:
    """Cross-kernel matrix K[i, j] = k^d(A_i, B_j)."""
    A = np.asarray(A, dtype=np.float64)
    B = A if B is None else np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise ValueError("point sets must have the same dimension")
    _check_unit(A, B)
    K = np.ones((A.shape[0], B.shape[0]))
    for k in _dims(A.shape[1], active_dims):
        a, b = A[:, k][:, None], B[:, k][None, :]
        K *= np.cosh(np.minimum(a, b)) * np.cosh(1.0 - np.maximum(a, b))
        K /= _SINH1
    return K


@dataclass(frozen=True, eq=False)
class KrrModel:
    features: np.ndarray
    alpha: np.ndarray
    ridge: float
    active_dims: Optional[tuple[int, ...]] = None

    def predict(self, features) -> np.ndarray:
        X = check_features(features, self.features.shape[1])
        return gram(X, self.features, self.active_dims) @ self.alpha


def krr_fit(features, outcome, ridge: float,
            active_dims: Optional[Sequence[int]] = None) -> KrrModel:
    """Solve (K + n * ridge * I) alpha = y by Cholesky.

    One retry with 1e-10 added to the diagonal is made if the factorization
    fails; a second failure raises :class:`GramSolveError`.
    """
    X = check_features(features)
    y = np.asarray(outcome, dtype=np.float64).ravel()
    n = X.shape[0]
    if n < 1 or y.shape[0] != n:
        raise ValueError("features and outcome must be non-empty and agree on n")
    if not ridge > 0.0:
        raise ValueError("ridge must be positive")
    dims = None if active_dims is None else tuple(int(k) for k in _dims(X.shape[1], active_dims))
    A = gram(X, active_dims=dims)
    A[np.diag_indices(n)] += n * ridge
    for jitter in (0.0, 1e-10):
        try:
            if jitter:
                A[np.diag_indices(n)] += jitter
            factor = linalg.cho_factor(A, lower=True, check_finite=False)
            break
        except linalg.LinAlgError:
            continue
    else:
        raise GramSolveError(f"Gram matrix not positive definite (n={n}, ridge={ridge})")
    alpha = linalg.cho_solve(factor, y, check_finite=False)
    return KrrModel(X.copy(), alpha, float(ridge), dims)


def krr_cross_validate(features, outcome, ridges: Sequence[float], labels: np.ndarray,
                       active_dims: Optional[Sequence[int]] = None):
    """Mean validation MSE per ridge for the given fold labels.

    Returns ``(best_ridge, mean_mse)``; ties go to the larger ridge.
    """
    X = check_features(features)
    y = np.asarray(outcome, dtype=np.float64).ravel()
    ridges = np.asarray(ridges, dtype=np.float64)
    folds = np.unique(labels)
    mse = np.zeros((ridges.size, folds.size))
    for b, k in enumerate(folds):
        tr, va = labels != k, labels == k
        for a, r in enumerate(ridges):
            m = krr_fit(X[tr], y[tr], r, active_dims)
            mse[a, b] = np.mean((y[va] - m.predict(X[va])) ** 2)
    mean = mse.mean(axis=1)
    best = np.flatnonzero(mean == mean.min())
    return float(ridges[best].max()), mean
