import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg, optimize

from tpsieve.basis import basis_table
from tpsieve.solvers import (
    LassoConfig,
    kkt_residual,
    lambda_grid,
    lambda_max,
    lasso_fit,
    lasso_path,
    objective,
    ols_fit,
)


def soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def qr_least_squares(X, y):
    Q, R = linalg.qr(X, mode="economic")
    return linalg.solve_triangular(R, Q.T @ y)


def split_variable_lasso(X, y, lam):
    """Independent oracle: beta = u - v with u, v >= 0, solved by L-BFGS-B."""
    n, J = X.shape

    def f(z):
        u, v = z[:J], z[J:]
        r = y - X @ (u - v)
        val = r @ r / n + lam * z.sum()
        g = -2.0 / n * (X.T @ r)
        return val, np.concatenate([g + lam, -g + lam])

    res = optimize.minimize(f, np.zeros(2 * J), jac=True, method="L-BFGS-B",
                            bounds=[(0, None)] * (2 * J),
                            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10_000})
    return res.x[:J] - res.x[J:]


# -- least squares --------------------------------------------------------------

def test_ols_mean():
    res = ols_fit(np.ones((2, 1)), [3.0, 5.0])
    assert res.beta[0] == pytest.approx(4.0)
    assert not res.rank_deficient


def test_ols_recovers_cosine():
    x = (np.arange(200) + 0.5) / 200
    X = basis_table("cosine", 5, x)
    res = ols_fit(X, np.cos(np.pi * x))
    expected = np.array([0.0, 1 / math.sqrt(2), 0.0, 0.0, 0.0])
    np.testing.assert_allclose(res.beta, expected, atol=1e-8)


def test_ols_matches_qr_oracle():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(10, 3)), rng.normal(size=10)
    np.testing.assert_allclose(ols_fit(X, y).beta, qr_least_squares(X, y), atol=1e-10)


def test_ols_wide_design_is_min_norm():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(5, 12)), rng.normal(size=5)
    res = ols_fit(X, y)
    assert res.rank_deficient
    np.testing.assert_allclose(res.beta, np.linalg.pinv(X) @ y, atol=1e-10)


def test_ols_errors():
    with pytest.raises(ValueError):
        ols_fit(np.ones((2, 1)), [1.0, np.nan])
    with pytest.raises(ValueError):
        ols_fit(np.ones((0, 1)), [])
    with pytest.raises(ValueError):
        ols_fit(np.ones((3, 1)), [1.0, 2.0])


# -- lambda_max --------------------------------------------------------------------

def test_lambda_max_values():
    rng = np.random.default_rng(2)
    assert lambda_max(rng.normal(size=(6, 3)), np.zeros(6)) == 0.0
    assert lambda_max(np.ones((4, 1)), np.ones(4)) == pytest.approx(2.0)


@pytest.mark.parametrize("seed", range(5))
def test_zero_solution_above_lambda_max(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(40, 15)), rng.normal(size=40)
    res = lasso_fit(X, y, LassoConfig(1.01 * lambda_max(X, y)))
    assert np.all(res.beta == 0.0)
    # just below, something enters
    res = lasso_fit(X, y, LassoConfig(0.95 * lambda_max(X, y)))
    assert np.count_nonzero(res.beta) >= 1


def test_lambda_max_with_free_intercept():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(50), rng.normal(size=(50, 6))])
    y = 3.0 + rng.normal(size=50)
    lm = lambda_max(X, y, penalize_intercept=False)
    res = lasso_fit(X, y, LassoConfig(1.01 * lm, penalize_intercept=False))
    assert np.all(res.beta[1:] == 0.0)
    assert res.beta[0] == pytest.approx(y.mean(), abs=1e-6)


# -- lasso ---------------------------------------------------------------------------

def test_lambda_zero_matches_ols():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(120, 8)), rng.normal(size=120)
    res = lasso_fit(X, y, LassoConfig(0.0))
    assert res.converged
    np.testing.assert_allclose(res.beta, ols_fit(X, y).beta, atol=1e-6)


def test_orthonormal_design_soft_threshold():
    n = 64
    Q, _ = np.linalg.qr(np.random.default_rng(5).normal(size=(n, 3)))
    X = math.sqrt(n) * Q  # X'X / n = I
    y = X @ np.array([1.5, -0.2, 0.05]) + 0.1 * np.random.default_rng(6).normal(size=n)
    ols = X.T @ y / n
    for lam in (0.0, 0.1, 0.3, 1.0, 5.0):
        res = lasso_fit(X, y, LassoConfig(lam))
        np.testing.assert_allclose(res.beta, soft(ols, lam / 2), atol=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_matches_split_variable_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    X, y = rng.normal(size=(30, 4)), rng.normal(size=30)
    lam = 0.3 * lambda_max(X, y)
    res = lasso_fit(X, y, LassoConfig(lam))
    ref = split_variable_lasso(X, y, lam)
    assert objective(X, y, res.beta, lam) <= (1 + 1e-6) * objective(X, y, ref, lam)


def test_matches_grid_search_in_two_dimensions():
    rng = np.random.default_rng(7)
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    lam = 0.2 * lambda_max(X, y)
    res = lasso_fit(X, y, LassoConfig(lam))
    # exhaustive grid, refined three times around the incumbent
    center, half = np.zeros(2), 2.0
    for _ in range(4):
        g = np.linspace(-half, half, 201)
        B = np.stack(np.meshgrid(center[0] + g, center[1] + g, indexing="ij"), -1).reshape(-1, 2)
        R = y[None, :] - B @ X.T
        vals = (R ** 2).mean(axis=1) + lam * np.abs(B).sum(axis=1)
        center, half = B[np.argmin(vals)], half / 50
    best = objective(X, y, center, lam)
    assert objective(X, y, res.beta, lam) <= (1 + 1e-6) * best


@pytest.mark.parametrize("seed", range(5))
def test_kkt_and_objective_trace(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(100, 50)), rng.normal(size=100)
    cfg = LassoConfig(0.1 * lambda_max(X, y))
    res = lasso_fit(X, y, cfg, record_objective=True)
    assert res.converged
    assert res.kkt_residual <= 1e-6 * max(1.0, cfg.lam)
    assert res.kkt_residual == pytest.approx(kkt_residual(X, y, res.beta, cfg.lam), rel=1e-6)
    trace = np.array(res.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12 * trace[0])


def test_nonconvergence_is_reported():
    rng = np.random.default_rng(8)
    X, y = rng.normal(size=(60, 40)), rng.normal(size=60)
    res = lasso_fit(X, y, LassoConfig(1e-4, max_sweeps=2))
    assert not res.converged and res.sweeps_used == 2


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_column_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(40, 6)), rng.normal(size=40)
    lam = 0.2 * lambda_max(X, y)
    perm = rng.permutation(6)
    a = lasso_fit(X, y, LassoConfig(lam)).beta
    b = lasso_fit(X[:, perm], y, LassoConfig(lam)).beta
    np.testing.assert_allclose(b, a[perm], atol=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        LassoConfig(-1.0)
    with pytest.raises(ValueError):
        LassoConfig(0.1, tol=0.0)
    with pytest.raises(ValueError):
        LassoConfig(0.1, max_sweeps=0)


# -- path -------------------------------------------------------------------------

def test_path_single_zero():
    rng = np.random.default_rng(9)
    X, y = rng.normal(size=(30, 5)), rng.normal(size=30)
    path = lasso_path(X, y, [1.1 * lambda_max(X, y)], LassoConfig())
    assert len(path) == 1 and np.all(path[0].beta == 0.0)


def test_path_active_set_mostly_grows():
    grows = total = 0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(80, 30))
        y = X[:, :4] @ np.array([2.0, -1.0, 1.0, 0.5]) + rng.normal(size=80)
        path = lasso_path(X, y, lambda_grid(lambda_max(X, y), 100), LassoConfig())
        sizes = [np.count_nonzero(p.beta) for p in path]
        grows += sum(b >= a for a, b in zip(sizes, sizes[1:]))
        total += len(sizes) - 1
    assert grows / total >= 0.9


def test_path_endpoint_matches_ols():
    rng = np.random.default_rng(10)
    X, y = rng.normal(size=(100, 6)), rng.normal(size=100)
    lams = list(lambda_grid(lambda_max(X, y), 20)) + [0.0]
    path = lasso_path(X, y, lams, LassoConfig())
    np.testing.assert_allclose(path[-1].beta, ols_fit(X, y).beta, atol=1e-5)


def test_path_rejects_unsorted():
    X, y = np.ones((3, 1)), np.ones(3)
    with pytest.raises(ValueError):
        lasso_path(X, y, [0.1, 0.2], LassoConfig())
    with pytest.raises(ValueError):
        lasso_path(X, y, [0.1, 0.1], LassoConfig())


def test_lambda_grid():
    g = lambda_grid(2.0, 4, 3.0)
    np.testing.assert_allclose(g, [2.0, 0.2, 0.02, 0.002])
    assert lambda_grid(0.0).tolist() == [0.0]
