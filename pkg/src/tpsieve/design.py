"""Design matrices of product basis functions."""

from __future__ import annotations

import numpy as np

from .basis import BasisKind, basis_table
from .unravel import IndexMatrix


def eval_product_basis(kind: BasisKind | str, row, x) -> float:
    """prod_k phi_{row[k]}(x[k]); unit entries are skipped."""
    row = np.asarray(row, dtype=np.int64)
    x = np.asarray(x, dtype=np.float64)
    if row.shape != x.shape or row.ndim != 1:
        raise ValueError(f"row of length {row.size} does not match point of length {x.size}")
    out = 1.0
    for j, xk in zip(row, x):
        if j > 1:
            out *= float(basis_table(kind, int(j), xk)[j - 1])
    return out


def check_features(features, d: int | None = None) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("features must be a 2-d array")
    if d is not None and X.shape[1] != d:
        raise ValueError(f"features have {X.shape[1]} columns, expected d={d}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise ValueError("features must lie in [0, 1]")
    return X


def build_design(features, kind: BasisKind | str, index: IndexMatrix) -> np.ndarray:
    """n x J matrix with entry (i, j) equal to psi_j(X_i).

    Each univariate value phi_f(x_i^k) is computed once per sample,
    dimension and frequency, then columns are assembled by multiplying the
    varying factors of every index row.  The result is Fortran-ordered since
    the solvers walk it column by column.
    """
    X = check_features(features, index.d)
    n = X.shape[0]
    J = len(index)
    out = np.ones((n, J), dtype=np.float64, order="F")
    rows = index.rows
    for k in range(index.d):
        freqs = rows[:, k]
        cols = np.flatnonzero(freqs > 1)
        if cols.size == 0:
            continue
        table = basis_table(kind, int(freqs.max()), X[:, k])
        out[:, cols] *= table[:, freqs[cols] - 1]
    return out
