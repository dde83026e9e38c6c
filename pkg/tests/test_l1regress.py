import numpy as np
import pytest

from fw_oracle import exact_l1_ls, grid_l1_ls
from hjbcolloc.kernels import build_kernel
from hjbcolloc.l1regress import (
    BudgetSchedule,
    FitError,
    RegressionModel,
    design_matrix,
    fit,
    lmo,
)


KERNEL = build_kernel(1, 2, support_scale=2.0)


def test_lmo_picks_largest_gradient_entry():
    v = lmo(np.array([0.5, -3.0, 1.0]), 2.0)
    np.testing.assert_array_equal(v, [0.0, 2.0, 0.0])
    v = lmo(np.array([0.5, 3.0, 1.0]), 2.0)
    np.testing.assert_array_equal(v, [0.0, -2.0, 0.0])


def test_lmo_ties_and_zero_gradient():
    # tie between |g_0| and |g_2|: lowest index wins
    v = lmo(np.array([3.0, 1.0, -3.0]), 1.0)
    np.testing.assert_array_equal(v, [-1.0, 0.0, 0.0])
    v = lmo(np.zeros(3), 1.5)
    np.testing.assert_array_equal(v, [1.5, 0.0, 0.0])


def test_design_matrix_shape():
    sites = np.linspace(-1, 1, 7)[:, None]
    centers = sites[::2]
    X = design_matrix(KERNEL, sites, centers)
    assert X.shape == (7, 5)
    np.testing.assert_array_equal(X[:, -1], 1.0)
    assert X[0, 0] == pytest.approx(1.0)  # site coincides with first center


def test_budget_schedule():
    sched = BudgetSchedule(beta0=2.0)
    vals = [sched(m) for m in (0, 1, 10, 100)]
    assert vals[0] == pytest.approx(2.0)
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert BudgetSchedule(growth=lambda m: 5.0 + m)(3) == 8.0


def test_fit_recovers_interpolant_when_budget_large():
    sites = np.linspace(-0.9, 0.9, 9)[:, None]
    targets = np.sin(1.0 + sites[:, 0])
    model = fit(targets, sites, KERNEL, budget=50.0, tolerance=1e-6,
                sites=sites)
    np.testing.assert_allclose(model.predict(sites), targets, atol=1e-5)
    assert model.gap_certificate <= 1e-12
    assert np.sum(np.abs(model.theta)) <= 50.0 + 1e-9


def test_fit_respects_budget_when_tight():
    sites = np.linspace(-0.9, 0.9, 9)[:, None]
    targets = 10.0 * np.sin(1.0 + sites[:, 0])
    model = fit(targets, sites, KERNEL, budget=0.5, tolerance=1e-5,
                sites=sites)
    assert np.sum(np.abs(model.theta)) <= 0.5 + 1e-9
    assert model.objective > 0.1  # the ball is too small to fit these targets


def test_fit_certificate_bounds_suboptimality():
    rng = np.random.default_rng(21)
    tol = 1e-5
    for trial in range(15):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 5))
        sites = rng.uniform(-0.9, 0.9, size=(n, 1))
        centers = np.unique(rng.uniform(-0.9, 0.9, size=(m, 1)), axis=0)
        targets = rng.standard_normal(n)
        beta = float(rng.uniform(0.2, 3.0))
        model = fit(targets, centers, KERNEL, budget=beta, tolerance=tol,
                    sites=sites)
        X = design_matrix(KERNEL, sites, centers)
        opt = exact_l1_ls(X, targets, beta)
        assert model.objective <= opt + tol**2 + 1e-12
        assert model.objective >= opt - 1e-10  # oracle really is a lower bound


def test_exact_oracle_agrees_with_grid_scan():
    rng = np.random.default_rng(4)
    for _ in range(5):
        X = rng.standard_normal((5, 3))
        u = rng.standard_normal(5)
        beta = float(rng.uniform(0.3, 2.0))
        exact = exact_l1_ls(X, u, beta)
        grid = grid_l1_ls(X, u, beta, resolution=0.01)
        assert grid >= exact - 1e-12
        assert grid <= exact + 0.05 * max(1.0, abs(exact))


def test_fit_warm_start_and_precomputed_design():
    sites = np.linspace(-0.9, 0.9, 9)[:, None]
    targets = np.sin(sites[:, 0])
    X = design_matrix(KERNEL, sites, sites)
    cold = fit(targets, sites, KERNEL, budget=20.0, tolerance=1e-6, design=X)
    warm = fit(targets, sites, KERNEL, budget=20.0, tolerance=1e-6, design=X,
               warm_start=cold.theta)
    assert warm.objective <= cold.objective + 1e-10
    # infeasible warm start gets scaled back into the ball, not rejected
    fit(targets, sites, KERNEL, budget=20.0, tolerance=1e-6, design=X,
        warm_start=100.0 * np.ones(10))


def test_fit_raises_when_iteration_cap_hit():
    rng = np.random.default_rng(17)
    sites = rng.uniform(-0.9, 0.9, size=(6, 1))
    targets = rng.standard_normal(6)
    with pytest.raises(FitError) as exc:
        fit(targets, sites, KERNEL, budget=0.8, tolerance=1e-14, sites=sites,
            max_iter=1)
    assert exc.value.best_gap > 0


def test_fit_input_validation():
    sites = np.linspace(-0.9, 0.9, 5)[:, None]
    targets = np.zeros(5)
    with pytest.raises(ValueError):
        fit(targets, sites, KERNEL, budget=-1.0, tolerance=1e-6, sites=sites)
    with pytest.raises(ValueError):
        fit(targets, sites, KERNEL, budget=1.0, tolerance=1e-6)
    with pytest.raises(ValueError):
        fit(np.zeros(4), sites, KERNEL, budget=1.0, tolerance=1e-6, sites=sites)


def test_predict_derivatives_match_finite_differences():
    sites = np.linspace(-0.9, 0.9, 9)[:, None]
    kernel = build_kernel(1, 4, support_scale=2.0)
    targets = np.sin(1.0 + sites[:, 0])
    model = fit(targets, sites, kernel, budget=50.0, tolerance=1e-7,
                sites=sites)
    step = 1e-5
    for x in (-0.3, 0.0, 0.55):
        x = np.array([x])
        num_g = (model.predict(x + step) - model.predict(x - step)) / (2 * step)
        assert abs(model.predict_grad(x)[0] - num_g) <= 1e-7
        num_h = (model.predict_grad(x + step)[0]
                 - model.predict_grad(x - step)[0]) / (2 * step)
        assert abs(model.predict_hess(x)[0, 0] - num_h) <= 1e-6


def test_model_theta_roundtrip():
    model = RegressionModel(
        kernel=KERNEL, centers=np.array([[0.0], [0.5]]),
        gamma=np.array([1.0, -2.0]), intercept=0.25, budget=4.0,
        gap_certificate=0.0)
    np.testing.assert_array_equal(model.theta, [1.0, -2.0, 0.25])
    with pytest.raises(ValueError):
        model.predict(np.array([0.1, 0.2]))
