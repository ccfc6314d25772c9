"""Fit/predict lifecycle for sieve regression models."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .basis import BasisKind
from .design import build_design
from .solvers import (
    LassoConfig,
    lambda_grid,
    lambda_max,
    lasso_fit,
    lasso_path,
    ols_fit,
)
from .unravel import MEMORY_BUDGET, IndexMatrix, index_matrix_for_count

FORMAT_VERSION = 1
OLS = "ols"
PENALIZED = "penalized"


class ModelFormatError(ValueError):
    """A model file could not be read back into a SieveModel."""


class DegenerateFeatureError(ValueError):
    """A feature column is constant on the training data."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    outcome: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.outcome, dtype=np.float64).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"features {X.shape} and outcome {y.shape} disagree on n")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "outcome", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.outcome[idx])


@dataclass(frozen=True)
class CVConfig:
    folds: int = 5
    n_lambdas: int = 50
    decades: float = 3.0
    j_grid: Optional[tuple[int, ...]] = None
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")
        if self.n_lambdas < 1:
            raise ValueError("n_lambdas must be >= 1")


@dataclass(frozen=True)
class FitConfig:
    """Estimator settings.

    ``J == 0`` and ``lam == 0`` (penalized only) ask for the default rules in
    :func:`default_hyperparams`.  With ``cv`` set, ``J`` and ``lam`` are chosen
    by :func:`cross_validate` instead.
    """

    estimator: str = PENALIZED
    basis: BasisKind = BasisKind.COSINE
    d_prime: int = 1
    J: int = 0
    lam: float = 0.0
    cv: Optional[CVConfig] = None
    penalize_intercept: bool = True
    tol: float = 1e-7
    max_sweeps: int = 10_000
    threads: int = 1

    def __post_init__(self):
        if self.estimator not in (OLS, PENALIZED):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        object.__setattr__(self, "basis", BasisKind.parse(self.basis))
        if self.d_prime < 1:
            raise ValueError("d_prime must be >= 1")
        if self.J < 0 or self.lam < 0:
            raise ValueError("J and lam must be non-negative")

    def lasso(self, lam: float) -> LassoConfig:
        return LassoConfig(lam, self.tol, self.max_sweeps, self.penalize_intercept)


@dataclass(frozen=True)
class Normalizer:
    bounds: np.ndarray  # (d, 2) rows of (min, max)

    @classmethod
    def fit(cls, X: np.ndarray) -> "Normalizer":
        lo, hi = X.min(axis=0), X.max(axis=0)
        bad = np.flatnonzero(~(hi > lo))
        if bad.size:
            raise DegenerateFeatureError(
                f"feature dimension {int(bad[0])} is constant on the training data"
            )
        return cls(np.column_stack([lo, hi]))

    def transform(self, X: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return np.clip((X - lo) / (hi - lo), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class SieveModel:
    basis: BasisKind
    index: IndexMatrix
    beta: np.ndarray
    normalizer: Normalizer
    meta: dict = field(default_factory=dict)
    cv_table: Optional["CVTable"] = field(default=None, repr=False)

    def __post_init__(self):
        if self.beta.shape != (len(self.index),):
            raise ValueError("beta length must equal the number of index rows")

    @property
    def d(self) -> int:
        return self.index.d

    def predict(self, features) -> np.ndarray:
        return predict(self, features)


def default_hyperparams(n: int, d: int, d_prime: int, c0: float = 5.0,
                        budget: int = MEMORY_BUDGET) -> FitConfig:
    """Basis count and penalty from the n^(1/3) log^(D'-1) n growth rule.

    J = ceil(c0 * n^(1/3) * max(1, ln n)^(d_prime - 1)), capped at 50 n and
    at the index-matrix budget; lam = sqrt(ln J / n).
    """
    if n < 2:
        raise ValueError("need at least two samples")
    J = math.ceil(c0 * float(np.cbrt(n)) * max(1.0, math.log(n)) ** (d_prime - 1))
    J = max(1, min(J, 50 * n, budget // max(d, 1)))
    lam = math.sqrt(math.log(J) / n)
    return FitConfig(estimator=PENALIZED, d_prime=d_prime, J=J, lam=lam)


def resolve_config(cfg: FitConfig, n: int, d: int) -> FitConfig:
    if cfg.d_prime > d:
        cfg = replace(cfg, d_prime=d)
    if cfg.J and (cfg.lam or cfg.estimator == OLS):
        return cfg
    dflt = default_hyperparams(n, d, cfg.d_prime)
    J = cfg.J or dflt.J
    lam = cfg.lam or (math.sqrt(math.log(J) / n) if cfg.estimator == PENALIZED else 0.0)
    return replace(cfg, J=J, lam=lam)


def _solve(design, y, cfg: FitConfig):
    if cfg.estimator == OLS:
        return ols_fit(design, y)
    return lasso_fit(design, y, cfg.lasso(cfg.lam))


def fit_sieve(data: Dataset, cfg: FitConfig) -> SieveModel:
    """Fit a sieve model on ``data``.

    Features are min-max scaled to [0, 1] with the training range, the first
    ``J`` indices of the unravelled order are expanded into a design matrix
    and the coefficients come from least squares or the lasso.
    """
    if data.n < 2:
        raise ValueError("need at least two samples")
    normalizer = Normalizer.fit(data.features)
    Z = normalizer.transform(data.features)
    table = None
    if cfg.cv is not None:
        cfg, table = cross_validate(data, cfg)
    cfg = resolve_config(cfg, data.n, data.d)
    index = index_matrix_for_count(data.d, cfg.d_prime, cfg.J)
    design = build_design(Z, cfg.basis, index)
    res = _solve(design, data.outcome, cfg)
    meta = {
        "n_train": data.n,
        "estimator": cfg.estimator,
        "lambda": float(cfg.lam),
        "J": int(cfg.J),
        "converged": bool(res.converged),
        "kkt_residual": float(res.kkt_residual),
        "rank_deficient": bool(res.rank_deficient),
    }
    return SieveModel(cfg.basis, index, res.beta, normalizer, meta, cv_table=table)


def predict(model: SieveModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None] if model.d == 1 else X[None, :]
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ValueError(f"features have {X.shape[-1]} columns, model expects d={model.d}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    design = build_design(model.normalizer.transform(X), model.basis, model.index)
    return design @ model.beta


# -- cross-validation -------------------------------------------------------

@dataclass
class CVTable:
    """Validation MSE for every (J, lambda, fold) combination."""

    j_grid: np.ndarray
    lambdas: np.ndarray  # (len(j_grid), n_lambdas)
    fold_mse: np.ndarray  # (len(j_grid), n_lambdas, folds)
    folds: np.ndarray  # fold label per sample

    @property
    def mean_mse(self) -> np.ndarray:
        return self.fold_mse.mean(axis=2)

    def records(self) -> list[dict]:
        out = []
        for a, J in enumerate(self.j_grid):
            for b, lam in enumerate(self.lambdas[a]):
                for k in range(self.fold_mse.shape[2]):
                    out.append({"J": int(J), "lambda": float(lam), "fold": k,
                                "mse": float(self.fold_mse[a, b, k])})
        return out


def fold_labels(n: int, folds: int, seed: int) -> np.ndarray:
    """Balanced fold assignment from a seeded permutation."""
    if folds > n:
        raise ValueError(f"{folds} folds requested for {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[perm] = np.arange(n) % folds
    return labels


def _cv_fold(design, y, labels, k, lambdas, cfg: FitConfig):
    train, valid = labels != k, labels == k
    Xt, yt = design[train], y[train]
    Xv, yv = design[valid], y[valid]
    if cfg.estimator == OLS:
        fits = [ols_fit(Xt, yt)]
    else:
        fits = lasso_path(Xt, yt, lambdas, cfg.lasso(0.0))
    return [float(np.mean((yv - Xv @ f.beta) ** 2)) for f in fits]


def cross_validate(data: Dataset, cfg: FitConfig):
    """Pick (J, lambda) by k-fold validation MSE.

    Each J in the grid gets a geometric lambda path from its own
    ``lambda_max`` (computed on all samples) down ``cv.decades`` decades; every
    fold uses the same path.  Ties in mean MSE go to the larger lambda, then
    the smaller J.  Returns the resolved config (``cv`` cleared) and the table.
    """
    cv = cfg.cv
    if cv is None:
        raise ValueError("cross_validate needs cfg.cv")
    n, d = data.n, data.d
    labels = fold_labels(n, cv.folds, cv.seed)
    if np.bincount(labels, minlength=cv.folds).min() < 1:
        raise ValueError("a fold has no samples")
    base = resolve_config(replace(cfg, cv=None), n, d)
    j_grid = np.array(sorted(set(cv.j_grid or (base.J,))), dtype=np.int64)
    if j_grid[0] < 1:
        raise ValueError("J grid entries must be >= 1")
    normalizer = Normalizer.fit(data.features)
    index = index_matrix_for_count(d, base.d_prime, int(j_grid[-1]))
    full = build_design(normalizer.transform(data.features), base.basis, index)
    y = data.outcome

    n_lam = 1 if cfg.estimator == OLS else cv.n_lambdas
    lambdas = np.zeros((j_grid.size, n_lam))
    fold_mse = np.empty((j_grid.size, n_lam, cv.folds))
    for a, J in enumerate(j_grid):
        design = np.asfortranarray(full[:, :J])
        if cfg.estimator == PENALIZED:
            lambdas[a] = lambda_grid(lambda_max(design, y, cfg.penalize_intercept),
                                     n_lam, cv.decades)
        jobs = [(design, y, labels, k, lambdas[a], base) for k in range(cv.folds)]
        if base.threads > 1:
            with ThreadPoolExecutor(base.threads) as pool:
                per_fold = list(pool.map(lambda args: _cv_fold(*args), jobs))
        else:
            per_fold = [_cv_fold(*args) for args in jobs]
        fold_mse[a] = np.array(per_fold).T

    table = CVTable(j_grid, lambdas, fold_mse, labels)
    mean = table.mean_mse
    best = mean.min()
    cands = [(a, b) for a in range(j_grid.size) for b in range(n_lam) if mean[a, b] == best]
    a, b = min(cands, key=lambda ab: (-lambdas[ab[0], ab[1]], j_grid[ab[0]]))
    chosen = replace(base, J=int(j_grid[a]), lam=float(lambdas[a, b]))
    if cfg.estimator == PENALIZED and chosen.lam == 0.0:
        chosen = replace(chosen, estimator=OLS)
    return chosen, table


# -- persistence ------------------------------------------------------------

def model_to_dict(model: SieveModel) -> dict:
    return {
        "version": FORMAT_VERSION,
        "basis": model.basis.value,
        "d": model.index.d,
        "d_prime": model.index.d_prime,
        "index": model.index.rows.tolist(),
        "beta": [float(b) for b in model.beta],
        "normalizer": model.normalizer.bounds.tolist(),
        "meta": {
            "n_train": model.meta.get("n_train"),
            "lambda": model.meta.get("lambda"),
            "converged": model.meta.get("converged"),
        },
    }


def model_from_dict(obj: dict) -> SieveModel:
    try:
        version = obj["version"]
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format version {version!r}")
        d, d_prime = int(obj["d"]), int(obj["d_prime"])
        rows = obj["index"]
        if any(len(r) != d for r in rows):
            raise ModelFormatError(f"index rows must have d={d} columns")
        index = IndexMatrix.from_rows(rows, d_prime)
        beta = np.array(obj["beta"], dtype=np.float64)
        if beta.shape != (len(index),):
            raise ModelFormatError(f"beta has {beta.size} entries for {len(index)} index rows")
        bounds = np.array(obj["normalizer"], dtype=np.float64)
        if bounds.shape != (d, 2) or not np.all(bounds[:, 1] > bounds[:, 0]):
            raise ModelFormatError("normalizer must hold d (min, max) pairs with max > min")
        return SieveModel(BasisKind.parse(obj["basis"]), index, beta, Normalizer(bounds),
                          dict(obj.get("meta") or {}))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def save_model(model: SieveModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> SieveModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ModelFormatError("model file must hold a JSON object")
    return model_from_dict(obj)
