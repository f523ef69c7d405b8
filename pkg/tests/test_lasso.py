import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_refine_lasso, lasso_objective
from robsparse.lasso import (
    ConvergenceWarning,
    SolverOptions,
    kkt_residual,
    lambda_grid,
    lambda_max,
    solve_weighted_lasso,
)

TIGHT = SolverOptions(tol=1e-12, max_iter=100_000)


def test_orthogonal_design_is_soft_thresholding():
    n = 4
    X = np.sqrt(n) * np.eye(n)[:, :2]
    y = np.array([3.0, -0.4, 0.0, 0.0]) * np.sqrt(n)
    # X'y / n = (3, -0.4); threshold lam * w
    b = solve_weighted_lasso(X, y, 0.5, w=np.array([1.0, 1.0]), opts=TIGHT)
    np.testing.assert_allclose(b, [2.5, 0.0], atol=1e-12)
    b = solve_weighted_lasso(X, y, 0.5, w=np.array([2.0, 0.1]), opts=TIGHT)
    np.testing.assert_allclose(b, [2.0, -0.35], atol=1e-12)


def test_zero_lambda_is_least_squares(rng):
    X = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    b = solve_weighted_lasso(X, y, 0.0, opts=TIGHT)
    np.testing.assert_allclose(b, np.linalg.lstsq(X, y, rcond=None)[0], atol=1e-8)


def test_above_lambda_max_gives_zero(rng):
    X = rng.standard_normal((20, 4))
    y = rng.standard_normal(20)
    w = rng.uniform(0.5, 2, 4)
    lm = lambda_max(X, y, w)
    np.testing.assert_array_equal(solve_weighted_lasso(X, y, lm * 1.0001, w), 0.0)
    assert np.any(solve_weighted_lasso(X, y, lm * 0.9, w) != 0)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_matches_brute_force_oracle(m):
    rng = np.random.default_rng(100 + m)
    for trial in range(4):
        X = rng.standard_normal((12, m))
        y = X @ rng.normal(0, 1.5, m) + rng.standard_normal(12)
        w = rng.uniform(0.3, 2.0, m)
        lam = rng.uniform(0.05, 0.6) * lambda_max(X, y, w)
        b = solve_weighted_lasso(X, y, lam, w, opts=TIGHT)
        ref, ref_val = grid_refine_lasso(X, y, lam, w)
        val = lasso_objective(X, y, b[None, :], lam, w)[0]
        assert val <= ref_val + 1e-9
        np.testing.assert_allclose(b, ref, atol=1e-5)


def test_kkt_at_solution(rng):
    X = rng.standard_normal((50, 10))
    y = X[:, :3] @ [2.0, -1.0, 0.5] + rng.standard_normal(50)
    w = rng.uniform(0.5, 2, 10)
    b = solve_weighted_lasso(X, y, 0.1, w, opts=TIGHT)
    assert kkt_residual(X, y, b, 0.1, w) < 1e-6


def test_kkt_detects_non_optimum(rng):
    X = rng.standard_normal((50, 4))
    y = X[:, 0] * 3 + rng.standard_normal(50)
    assert kkt_residual(X, y, np.zeros(4), 0.01) > 1.0


def test_zero_weight_column_is_unpenalized(rng):
    X = rng.standard_normal((40, 3))
    y = X @ [0.05, 2.0, 0.0] + 0.1 * rng.standard_normal(40)
    b = solve_weighted_lasso(X, y, 10.0, w=np.array([0.0, 1.0, 1.0]), opts=TIGHT)
    assert b[0] != 0 and b[1] == 0 and b[2] == 0


def test_lambda_grid_shape(rng):
    X = rng.standard_normal((30, 10))
    y = rng.standard_normal(30)
    grid = lambda_grid(X, y, count=20)
    assert grid.shape == (20,)
    assert grid[0] == pytest.approx(lambda_max(X, y))
    assert grid[-1] == pytest.approx(1e-3 * grid[0])
    assert np.all(np.diff(grid) < 0)
    wide = lambda_grid(rng.standard_normal((10, 30)), rng.standard_normal(10))
    assert wide[-1] == pytest.approx(1e-2 * wide[0])


def test_lambda_grid_zero_response_warns():
    with pytest.warns(UserWarning, match="lambda_max is zero"):
        grid = lambda_grid(np.eye(3), np.zeros(3))
    np.testing.assert_array_equal(grid, [0.0])


def test_warm_path_equals_cold_solves(rng):
    X = rng.standard_normal((40, 15))
    y = X[:, :4] @ [1, -2, 3, 0.5] + rng.standard_normal(40)
    grid = lambda_grid(X, y, count=10)
    warm = None
    for lam in grid:
        warm = solve_weighted_lasso(X, y, lam, warm_start=warm, opts=TIGHT)
        cold = solve_weighted_lasso(X, y, lam, opts=TIGHT)
        np.testing.assert_allclose(warm, cold, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_column_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((25, 6))
    y = rng.standard_normal(25)
    w = rng.uniform(0.2, 2, 6)
    lam = 0.2 * lambda_max(X, y, w)
    perm = rng.permutation(6)
    b = solve_weighted_lasso(X, y, lam, w, opts=TIGHT)
    bp = solve_weighted_lasso(X[:, perm], y, lam, w[perm], opts=TIGHT)
    np.testing.assert_allclose(bp, b[perm], atol=1e-8)


def test_objective_nonincreasing_over_sweeps(rng):
    X = rng.standard_normal((30, 8))
    y = rng.standard_normal(30)
    lam = 0.05
    w = np.ones(8)
    values = []
    for k in range(1, 15):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            b = solve_weighted_lasso(X, y, lam, w, opts=SolverOptions(tol=1e-14, max_iter=k, active_set=False))
        values.append(lasso_objective(X, y, b[None, :], lam, w)[0])
    assert np.all(np.diff(values) <= 1e-13)


def test_nonconvergence_warns(rng):
    X = rng.standard_normal((30, 8))
    X[:, 1] = X[:, 0] + 1e-3 * rng.standard_normal(30)
    y = rng.standard_normal(30)
    with pytest.warns(ConvergenceWarning):
        _, info = solve_weighted_lasso(X, y, 1e-4, opts=SolverOptions(tol=1e-14, max_iter=2), return_info=True)
    assert not info.converged and info.sweeps == 2


def test_input_validation():
    with pytest.raises(ValueError, match="shape"):
        solve_weighted_lasso(np.ones((3, 2)), np.ones(4), 0.1)
    with pytest.raises(ValueError, match="NaN"):
        solve_weighted_lasso(np.ones((3, 1)), np.array([1, np.nan, 0]), 0.1)
    with pytest.raises(ValueError, match="zero column"):
        solve_weighted_lasso(np.zeros((3, 1)), np.ones(3), 0.1)
    with pytest.raises(ValueError, match="weights"):
        solve_weighted_lasso(np.ones((3, 1)), np.ones(3), 0.1, w=np.array([-1.0]))
