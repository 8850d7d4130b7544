import numpy as np
import pytest

from tmcda.lasso import (
    LassoModel,
    StandardizationParams,
    coefficient_report,
    cross_validate_lambda,
    fit_lasso,
    lambda_max,
    select_features,
)
from tmcda.schema import DEFAULT_SCHEMA

from _oracles import l1_objective, proximal_gradient_lasso, standardize, subgradient_violation


def _random_problem(seed, n=50, p=5, noise=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p)) * rng.uniform(0.5, 3.0, size=p)
    beta = rng.standard_normal(p)
    y = 2.0 + X @ beta + noise * rng.standard_normal(n)
    return X, y


def test_lambda_zero_recovers_least_squares():
    X, y = _random_problem(0)
    model = fit_lasso(X, y, lam=0.0, tol=1e-12, max_sweeps=50_000)
    design = np.column_stack([np.ones(len(y)), X])
    ols, *_ = np.linalg.lstsq(design, y, rcond=None)
    assert abs(model.intercept - ols[0]) < 1e-8
    assert np.max(np.abs(model.coef - ols[1:])) < 1e-8


def test_lambda_at_max_gives_all_zeros():
    X, y = _random_problem(1)
    lam = lambda_max(X, y)
    # independent recomputation of the threshold
    Z, yc = standardize(X, y)
    assert abs(lam - np.max(np.abs(Z.T @ yc)) / len(yc)) < 1e-12
    model = fit_lasso(X, y, lam=lam * 1.0000001)
    assert np.all(model.coef_std == 0.0)
    assert subgradient_violation(Z, yc, np.zeros(X.shape[1]), lam * 1.0000001) == 0.0


def test_matches_proximal_gradient_oracle():
    X, y = _random_problem(2)
    lam = 0.1 * lambda_max(X, y)
    model = fit_lasso(X, y, lam, tol=1e-12, max_sweeps=50_000)
    Z, yc = standardize(X, y)
    oracle = proximal_gradient_lasso(Z, yc, lam)
    assert abs(l1_objective(Z, yc, model.coef_std, lam) - l1_objective(Z, yc, oracle, lam)) < 1e-9
    assert subgradient_violation(Z, yc, model.coef_std, lam) < 1e-8


def test_objective_monotone_over_sweeps():
    X, y = _random_problem(3, n=80, p=10)
    model = fit_lasso(X, y, 0.05 * lambda_max(X, y))
    trace = np.array(model.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12)
    assert model.objective_value == trace[-1]


def test_larger_lambda_solution_is_worse_at_smaller_penalty():
    X, y = _random_problem(4)
    lam1 = 0.02 * lambda_max(X, y)
    lam2 = 0.4 * lambda_max(X, y)
    m1 = fit_lasso(X, y, lam1, tol=1e-12, max_sweeps=50_000)
    m2 = fit_lasso(X, y, lam2, tol=1e-12, max_sweeps=50_000)
    Z, yc = standardize(X, y)
    assert l1_objective(Z, yc, m2.coef_std, lam1) >= l1_objective(Z, yc, m1.coef_std, lam1) - 1e-12


def test_permutation_equivariance():
    X, y = _random_problem(5)
    perm = np.array([3, 0, 4, 1, 2])
    lam = 0.1 * lambda_max(X, y)
    m = fit_lasso(X, y, lam, tol=1e-12, max_sweeps=50_000)
    mp = fit_lasso(X[:, perm], y, lam, tol=1e-12, max_sweeps=50_000)
    assert np.allclose(mp.coef, m.coef[perm], atol=1e-8)


def test_column_scaling_leaves_fitted_values_unchanged():
    X, y = _random_problem(6)
    lam = 0.1 * lambda_max(X, y)
    m = fit_lasso(X, y, lam, tol=1e-12, max_sweeps=50_000)
    X2 = X.copy()
    X2[:, 2] *= 37.5
    m2 = fit_lasso(X2, y, lam, tol=1e-12, max_sweeps=50_000)
    assert np.allclose(m.predict(X), m2.predict(X2), atol=1e-8)


def test_zero_variance_column_recorded_and_excluded():
    X, y = _random_problem(7)
    X[:, 1] = 4.2
    model = fit_lasso(X, y, 0.05 * lambda_max(X, y))
    assert model.standardization.zero_variance == (1,)
    assert model.coef[1] == 0.0
    assert 1 not in model.selected


def _model_with_coefs(coef_std):
    coef_std = np.asarray(coef_std, dtype=float)
    p = len(coef_std)
    std = StandardizationParams(np.zeros(p), np.ones(p), 0.0, ())
    return LassoModel(0.0, coef_std.copy(), coef_std, 0.1,
                      tuple(int(j) for j in np.flatnonzero(coef_std)), 0.0, True, 1, (0.0,), std)


def test_select_features_support_definition():
    assert select_features(_model_with_coefs([0.0, 0.0, 0.0])) == ()
    assert select_features(_model_with_coefs([0.0, 1.3, 0.0, -0.2])) == (1, 3)


def test_selection_recovers_planted_signal_over_seeds():
    hits, clean = 0, 0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        X = rng.standard_normal((120, 6))
        y = 3.0 * X[:, 0] - 2.0 * X[:, 2] + 0.3 * rng.standard_normal(120)
        model = fit_lasso(X, y, 0.1 * lambda_max(X, y))
        picked = set(model.selected)
        if {0, 2} <= picked:
            hits += 1
        if picked <= {0, 2}:
            clean += 1
    assert hits == 20
    assert clean >= 16


def test_non_convergence_reported_not_silent():
    X, y = _random_problem(8, n=60, p=8)
    with pytest.warns(RuntimeWarning, match="did not converge"):
        model = fit_lasso(X, y, 1e-6, tol=1e-14, max_sweeps=2)
    assert model.converged is False
    assert model.n_sweeps == 2


def test_input_validation():
    X, y = _random_problem(9)
    with pytest.raises(ValueError, match="non-finite"):
        fit_lasso(np.array([[np.nan, 1.0], [1.0, 2.0], [0.0, 1.0]]), np.ones(3), 0.1)
    with pytest.raises(ValueError):
        fit_lasso(X, y, -0.5)
    with pytest.raises(ValueError):
        fit_lasso(X[:1], y[:1], 0.1)


def test_cross_validation_deterministic_and_sane():
    X, y = _random_problem(10, n=70)
    lam_a, grid_a, err_a = cross_validate_lambda(X, y, seed=5, grid_size=20)
    lam_b, grid_b, err_b = cross_validate_lambda(X, y, seed=5, grid_size=20)
    assert lam_a == lam_b
    assert np.array_equal(err_a, err_b)
    assert grid_a[0] == pytest.approx(lambda_max(X, y))
    assert 0 < lam_a < lambda_max(X, y)


def test_coefficient_report_layout():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(0, 10, size=(40, 20)),
                         rng.integers(1, 3, size=(40, 1)),
                         rng.integers(1, 4, size=(40, 1)),
                         rng.integers(1, 5, size=(40, 1)),
                         rng.integers(1, 5, size=(40, 1)),
                         rng.integers(0, 24, size=(40, 1))]).astype(float)
    y = X[:, 0] + rng.standard_normal(40)
    models = {m: fit_lasso(X, y, 0.05 * lambda_max(X, y)) for m in ("left", "through", "right")}
    text = coefficient_report(models, DEFAULT_SCHEMA)
    lines = text.strip().splitlines()
    assert len(lines) == 26
    assert lines[0] == "variable,left,through,right"
    assert all(line.count(",") >= 3 for line in lines[1:])
    assert "Through movement detector occupancy time" in lines[1]

    huge = {m: fit_lasso(X, y, 10 * lambda_max(X, y)) for m in ("left", "through", "right")}
    zero_text = coefficient_report(huge, DEFAULT_SCHEMA)
    for line in zero_text.strip().splitlines()[1:]:
        assert line.endswith("0.0000,0.0000,0.0000")


def test_coefficient_report_requires_all_movements():
    with pytest.raises(ValueError, match="right"):
        coefficient_report({"left": _model_with_coefs([0.0]), "through": _model_with_coefs([0.0])})
