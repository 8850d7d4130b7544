"""L1-penalized linear regression via cyclic coordinate descent.

The solver standardizes predictors to zero mean and unit variance, centers
the response, and minimizes

    f(b) = (1/(2n)) * sum_i (y_i - yhat_i)^2 + lambda * sum_j |b_j|

over the standardized coefficients, with an exact soft-threshold update per
coordinate. Reported coefficients are mapped back to the original scale
(fitted values are unchanged); optimality and objective values refer to the
standardized problem, which makes a single lambda meaningful across columns
with heterogeneous units.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .schema import DEFAULT_SCHEMA, MOVEMENTS


@dataclass(frozen=True)
class StandardizationParams:
    """Column means/stds of the predictors and the response mean.

    Zero-variance columns are recorded and excluded from penalization and
    selection; their coefficients are fixed at zero.
    """

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    zero_variance: tuple[int, ...]


@dataclass(frozen=True)
class LassoModel:
    """Fitted model; ``coef`` is on the original predictor scale."""

    intercept: float
    coef: np.ndarray
    coef_std: np.ndarray
    lam: float
    selected: tuple[int, ...]
    objective_value: float
    converged: bool
    n_sweeps: int
    objective_trace: tuple[float, ...]
    standardization: StandardizationParams

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.intercept + X @ self.coef


def _standardize(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, StandardizationParams]:
    x_mean = X.mean(axis=0)
    x_std = X.std(axis=0)
    constant = x_std <= 1e-12 * np.maximum(1.0, np.abs(x_mean))
    zero_var = tuple(int(j) for j in np.flatnonzero(constant))
    safe_std = np.where(constant, 1.0, x_std)
    Z = np.where(constant, 0.0, (X - x_mean) / safe_std)
    y_mean = float(y.mean())
    return Z, y - y_mean, StandardizationParams(x_mean, safe_std, y_mean, zero_var)


def _objective(Z: np.ndarray, yc: np.ndarray, beta: np.ndarray, lam: float) -> float:
    r = yc - Z @ beta
    n = len(yc)
    return float(r @ r / (2.0 * n) + lam * np.abs(beta).sum())


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty for which the all-zero coefficient vector is optimal."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Z, yc, _ = _standardize(X, y)
    return float(np.max(np.abs(Z.T @ yc)) / len(yc))


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
) -> LassoModel:
    """Fit by cyclic coordinate descent with closed-form soft-thresholding.

    Iterates full sweeps until the maximum standardized-coefficient change in
    a sweep drops below ``tol``. A run that exhausts ``max_sweeps`` is
    returned with ``converged=False`` and a warning, never silently.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError(f"X shape {X.shape} incompatible with y length {len(y)}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in inputs")

    n, p = X.shape
    Z, yc, std = _standardize(X, y)
    active = np.ones(p, dtype=bool)
    active[list(std.zero_variance)] = False

    beta = np.zeros(p)
    r = yc.copy()
    trace = []
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            if not active[j]:
                continue
            old = beta[j]
            rho = Z[:, j] @ r / n + old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0)
            if new != old:
                r -= (new - old) * Z[:, j]
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        trace.append(_objective(Z, yc, beta, lam))
        if max_delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"coordinate descent did not converge in {max_sweeps} sweeps "
            f"(last max coefficient change >= {tol:g})",
            RuntimeWarning,
        )

    coef = np.where(active, beta / std.x_std, 0.0)
    intercept = std.y_mean - float(coef @ std.x_mean)
    selected = tuple(int(j) for j in np.flatnonzero(beta != 0.0))
    return LassoModel(
        intercept=intercept,
        coef=coef,
        coef_std=beta,
        lam=lam,
        selected=selected,
        objective_value=trace[-1],
        converged=converged,
        n_sweeps=sweeps,
        objective_trace=tuple(trace),
        standardization=std,
    )


def cross_validate_lambda(
    X: np.ndarray,
    y: np.ndarray,
    n_folds: int = 5,
    grid_size: int = 50,
    lam_min_ratio: float = 1e-3,
    seed: int = 0,
    tol: float = 1e-7,
    max_sweeps: int = 2_000,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Pick lambda by k-fold CV over a descending logarithmic grid.

    Returns (best lambda, grid, mean validation MSE per grid point). Ties
    resolve to the largest (sparsest) lambda. Fold assignment depends only on
    the seed, and fold results are independent of evaluation order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < n_folds:
        raise ValueError(f"need at least {n_folds} rows for {n_folds}-fold CV")
    lam_hi = lambda_max(X, y)
    if lam_hi == 0.0:
        return 0.0, np.zeros(1), np.zeros(1)
    grid = lam_hi * np.logspace(0.0, np.log10(lam_min_ratio), grid_size)
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, n_folds)
    errors = np.zeros((n_folds, grid_size))
    for f, val_idx in enumerate(folds):
        train = np.setdiff1d(order, val_idx)
        for g, lam in enumerate(grid):
            model = fit_lasso(X[train], y[train], lam, tol=tol, max_sweeps=max_sweeps)
            resid = y[val_idx] - model.predict(X[val_idx])
            errors[f, g] = resid @ resid / len(val_idx)
    mean_err = errors.mean(axis=0)
    return float(grid[int(np.argmin(mean_err))]), grid, mean_err


def select_features(model: LassoModel) -> tuple[int, ...]:
    """Indices with strictly nonzero coefficients, in column order."""
    return model.selected


def coefficient_report(models: dict[str, LassoModel], schema=DEFAULT_SCHEMA,
                       movements: tuple[str, ...] = MOVEMENTS) -> str:
    """Render per-movement coefficients as delimited text.

    One row per schema column in fixed order, one column per requested
    movement (default: left, through, right), values on the original
    predictor scale.
    """
    for movement in movements:
        if movement not in models:
            raise ValueError(f"missing model for movement {movement!r}")
    lines = ["variable," + ",".join(movements)]
    for j, desc in enumerate(schema.descriptions()):
        cells = [f"{models[m].coef[j]:.4f}" for m in movements]
        lines.append(f"\"{desc}\"," + ",".join(cells))
    return "\n".join(lines) + "\n"
