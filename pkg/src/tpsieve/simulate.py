"""Synthetic regression problems, evaluation metrics and the method harness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import BasisKind
from .design import build_design
from .kernel import krr_cross_validate, krr_fit
from .model import (
    CVConfig,
    Dataset,
    FitConfig,
    Normalizer,
    OLS,
    PENALIZED,
    SieveModel,
    default_hyperparams,
    fit_sieve,
    fold_labels,
)
from .solvers import ols_fit
from .unravel import generate_index_matrix, index_matrix_for_count

NORM_DRAWS = 100_000
NORM_SEED = 20_211_031
TRUTHS = ("poly", "cos", "interaction")
METHODS = ("sieve-ols", "sieve-lasso", "sieve-additive", "krr", "krr-oracle")


def legendre(x, j: int):
    """Unnormalized Legendre polynomial on [-1, 1]: P_1(x) = x for j=2,
    P_2(x) = (3x^2 - 1)/2 for j=3."""
    x = np.asarray(x, dtype=np.float64)
    if j == 2:
        out = x
    elif j == 3:
        out = (3.0 * x * x - 1.0) / 2.0
    else:
        raise ValueError(f"Legendre order j={j} not supported (use 2 or 3)")
    return float(out) if out.ndim == 0 else out


def _points(x, D: int):
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] < D:
        raise ValueError(f"points have {X.shape[1]} coordinates, need at least D={D}")
    return X, single


def _ret(v, single):
    return float(v[0]) if single else v


def truth_poly(x, D: int):
    if D < 2:
        raise ValueError("the polynomial truth needs D >= 2")
    X, single = _points(x, D)
    u = 2.0 * (X[:, :D] - 0.5)
    out = np.zeros(X.shape[0])
    for k in range(D - 1):
        out += legendre(u[:, k], 3) + legendre(u[:, k], 2) * legendre(u[:, k + 1], 2)
    return _ret(out, single)


def truth_interaction(x, D: int):
    if D < 2:
        raise ValueError("the interaction truth needs D >= 2")
    X, single = _points(x, D)
    u = 2.0 * (X[:, :D] - 0.5)
    out = np.zeros(X.shape[0])
    for k in range(D - 1):
        out += legendre(u[:, k], 2) * legendre(u[:, k + 1], 3)
    return _ret(out, single)


@lru_cache(maxsize=None)
def _cos_terms(D: int) -> np.ndarray:
    return np.array(generate_index_matrix(D, D, 8).rows)


def truth_cos(x, D: int):
    """Sum over D-tuples with entry product <= 8 of prod_k cos((j^k - 1) pi x^k)."""
    if D < 1:
        raise ValueError("the cosine truth needs D >= 1")
    X, single = _points(x, D)
    terms = _cos_terms(D)
    out = np.ones((X.shape[0], terms.shape[0]))
    for k in range(D):
        out *= np.cos((terms[:, k] - 1)[None, :] * np.pi * X[:, k : k + 1])
    return _ret(out.sum(axis=1), single)


_TRUTH_FUNCS = {"poly": truth_poly, "cos": truth_cos, "interaction": truth_interaction}


def truth_function(name: str) -> Callable:
    try:
        return _TRUTH_FUNCS[name]
    except KeyError:
        raise ValueError(f"unknown truth {name!r}; choose from {TRUTHS}") from None


@lru_cache(maxsize=None)
def truth_norm_sq(name: str, D: int) -> float:
    """Monte Carlo estimate of ||f||^2 under the uniform distribution."""
    rng = np.random.default_rng(NORM_SEED)
    X = rng.random((NORM_DRAWS, D))
    return float(np.mean(truth_function(name)(X, D) ** 2))


@dataclass(frozen=True)
class SimulationSpec:
    truth: str = "poly"
    d: int = 4
    D: int = 2
    n_train: int = 800
    n_test: int = 2000
    snr: float = 3.0
    seed: int = 0

    def __post_init__(self):
        truth_function(self.truth)
        if self.D < 1 or self.d < self.D:
            raise ValueError(f"need 1 <= D <= d, got D={self.D}, d={self.d}")
        if self.truth in ("poly", "interaction") and self.D < 2:
            raise ValueError(f"truth {self.truth!r} needs D >= 2")
        if self.n_train < 2 or self.n_test < 1:
            raise ValueError("sample sizes too small")
        if not self.snr > 0:
            raise ValueError("snr must be positive")

    @property
    def noise_sd(self) -> float:
        return math.sqrt(truth_norm_sq(self.truth, self.D) / self.snr)


def generate_dataset(spec: SimulationSpec) -> tuple[Dataset, Dataset]:
    """Uniform features, truth plus Gaussian noise at the requested SNR.

    Train and test draws come from independent child streams of ``spec.seed``.
    """
    f = truth_function(spec.truth)
    sd = spec.noise_sd
    out = []
    for stream, m in zip(np.random.SeedSequence(spec.seed).spawn(2), (spec.n_train, spec.n_test)):
        rng = np.random.default_rng(stream)
        X = rng.random((m, spec.d))
        y = f(X, spec.D) + sd * rng.standard_normal(m)
        out.append(Dataset(X, y))
    return out[0], out[1]


@dataclass(frozen=True)
class Metrics:
    mse: float
    r2: Optional[float]


def evaluate(predictor, test: Dataset) -> Metrics:
    """Test MSE and generalization R^2 (population variance of test outcome).

    ``predictor`` is a fitted model with ``predict`` or a plain callable.
    """
    if test.n < 1:
        raise ValueError("empty test set")
    pred = predictor.predict(test.features) if hasattr(predictor, "predict") else predictor(test.features)
    mse = float(np.mean((test.outcome - np.asarray(pred)) ** 2))
    var = float(np.var(test.outcome))
    return Metrics(mse, 1.0 - mse / var if var > 0 else None)


# -- method harness --------------------------------------------------------

KRR_RIDGES = tuple(float(v) for v in np.logspace(-1, -7, 13))


def method_config(method: str, n: int, d: int, d_prime: int = 2, folds: int = 5,
                  seed: int = 0, n_lambdas: int = 30) -> FitConfig:
    """Sieve configuration used by the harness for ``method``.

    The J grid is half, one and two times the default basis count.
    """
    if method == "sieve-additive":
        d_prime = 1
    d_prime = min(d_prime, d)
    J0 = default_hyperparams(n, d, d_prime).J
    j_grid = tuple(sorted({max(2, J0 // 2), J0, 2 * J0}))
    estimator = OLS if method == "sieve-ols" else PENALIZED
    if estimator == OLS:
        # unpenalized fits need J well below the training-fold size
        cap = max(2, int(0.5 * n * (folds - 1) / folds))
        j_grid = tuple(sorted({min(J, cap) for J in j_grid}))
    return FitConfig(estimator=estimator, d_prime=d_prime,
                     cv=CVConfig(folds=folds, n_lambdas=n_lambdas, j_grid=j_grid, seed=seed))


def run_method(method: str, train: Dataset, test: Dataset, *, D: Optional[int] = None,
               d_prime: int = 2, folds: int = 5, seed: int = 0) -> Metrics:
    """Fit ``method`` with cross-validated hyperparameters and score it on ``test``.

    All methods share the fold assignment derived from ``seed``.
    """
    if method.startswith("sieve-"):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        cfg = method_config(method, train.n, train.d, d_prime, folds, seed)
        return evaluate(fit_sieve(train, cfg), test)
    if method in ("krr", "krr-oracle"):
        dims = None
        if method == "krr-oracle":
            if D is None:
                raise ValueError("krr-oracle needs the active dimension D")
            dims = tuple(range(D))
        labels = fold_labels(train.n, folds, seed)
        ridge, _ = krr_cross_validate(train.features, train.outcome, KRR_RIDGES, labels, dims)
        return evaluate(krr_fit(train.features, train.outcome, ridge, dims), test)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def simulate(spec: SimulationSpec, methods: Sequence[str], d_prime: int = 2,
             folds: int = 5) -> list[dict]:
    """One replicate: a row of metrics per method."""
    train, test = generate_dataset(spec)
    rows = []
    for method in methods:
        m = run_method(method, train, test, D=spec.D, d_prime=d_prime, folds=folds, seed=spec.seed)
        rows.append({"method": method, "truth": spec.truth, "d": spec.d, "D": spec.D,
                     "n": spec.n_train, "snr": spec.snr, "seed": spec.seed,
                     "mse": m.mse, "r2": m.r2})
    return rows


# -- convergence rate ----------------------------------------------------------

@dataclass
class RateResult:
    n_list: list
    mse: list
    slope: float


def _default_j_rule(n: int) -> int:
    return int(math.ceil(float(np.cbrt(n))))


def rate_experiment(n_list: Sequence[int], truth: Callable, j_rule: Callable = _default_j_rule,
                    snr: float = 3.0, noise_sd: Optional[float] = None, replicates: int = 10,
                    n_test: int = 2000, seed: int = 0, basis: str = "cosine") -> RateResult:
    """Log-log slope of the least-squares sieve's error against n (one dimension).

    Features live on the known domain [0, 1], so no min-max rescaling is
    applied.  The error of a fit is the mean squared distance to the
    noiseless truth on an independent test sample.  ``truth`` maps an ``(m, 1)`` array to ``m``
    values; noise has standard deviation ``noise_sd`` or, when not given,
    sqrt(||f||^2 / snr).
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2:
        raise ValueError("need at least two sample sizes")
    if noise_sd is None:
        grid = np.random.default_rng(NORM_SEED).random((NORM_DRAWS, 1))
        noise_sd = math.sqrt(float(np.mean(np.asarray(truth(grid)) ** 2)) / snr)
    unit = Normalizer(np.array([[0.0, 1.0]]))
    mses = []
    for a, n in enumerate(n_list):
        streams = np.random.SeedSequence([seed, a]).spawn(replicates)
        acc = []
        for stream in streams:
            rng = np.random.default_rng(stream)
            X = rng.random((n, 1))
            y = np.asarray(truth(X)) + noise_sd * rng.standard_normal(n)
            index = index_matrix_for_count(1, 1, j_rule(n))
            beta = ols_fit(build_design(X, basis, index), y).beta
            model = SieveModel(BasisKind.parse(basis), index, beta, unit)
            Xt = rng.random((n_test, 1))
            acc.append(np.mean((model.predict(Xt) - np.asarray(truth(Xt))) ** 2))
        mses.append(math.fsum(acc) / replicates)
    slope = float(np.polyfit(np.log(n_list), np.log(mses), 1)[0])
    return RateResult(n_list, mses, slope)
