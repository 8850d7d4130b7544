"""Gradient boosting over regression trees with balanced domain weighting.

The balanced variant trains on a labeled source set and a pseudo-target set,
weighting every source instance by (1 - alpha) and every pseudo-target
instance by alpha inside the loss. The constant initializer, the per-stage
residual fit and the stage multiplier all use those weights; alpha = 0
reduces exactly to standard gradient boosting on the source set alone, and
alpha = 1 trains on the pseudo-target set alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tree import RegressionTree, fit_tree

MODEL_FORMAT = "boosted-model"
MODEL_FORMAT_VERSION = 1

_LOSSES = ("squared",)


@dataclass(frozen=True)
class TrainConfig:
    n_stages: int = 200
    max_depth: int = 3
    min_samples_leaf: int = 2
    shrinkage: float = 0.1
    alpha: float = 0.5
    seed: int = 0
    loss: str = "squared"

    def __post_init__(self):
        if self.n_stages < 0:
            raise ValueError("n_stages must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError("shrinkage must be in (0, 1]")
        if self.loss not in _LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass(frozen=True)
class BoostedModel:
    """Constant initializer plus M stages of (multiplier, tree)."""

    f0: float
    stages: tuple[tuple[float, RegressionTree], ...]
    shrinkage: float
    alpha: float
    loss: str
    n_features: int
    loss_trace: tuple[float, ...] = ()

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def pseudo_residuals(loss: str, y: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Negative loss gradient with respect to the current predictions."""
    if loss not in _LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    y = np.asarray(y, dtype=float)
    F = np.asarray(F, dtype=float)
    if y.shape != F.shape:
        raise ValueError("y and F must have the same length")
    return y - F


def _loss_values(loss: str, y: np.ndarray, F: np.ndarray) -> np.ndarray:
    if loss not in _LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    return 0.5 * (y - F) ** 2


def compute_gamma(F_prev: np.ndarray, h: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Closed-form weighted line search for the stage multiplier.

    For squared loss the optimum is sum(w*r*h) / sum(w*h^2) with r = y - F;
    a zero denominator (h identically zero on weighted support) yields 0.
    """
    F_prev = np.asarray(F_prev, dtype=float)
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    denom = float(w @ (h * h))
    if denom == 0.0:
        return 0.0
    return float(w @ ((y - F_prev) * h)) / denom


def _boost(X: np.ndarray, y: np.ndarray, w: np.ndarray, config: TrainConfig, alpha: float) -> BoostedModel:
    f0 = float(w @ y / w.sum())
    F = np.full(len(y), f0)
    stages = []
    trace = [float(w @ _loss_values(config.loss, y, F))]
    for _ in range(config.n_stages):
        r = pseudo_residuals(config.loss, y, F)
        tree = fit_tree(X, r, w, config.max_depth, config.min_samples_leaf)
        h = tree.predict(X)
        gamma = compute_gamma(F, h, y, w)
        F = F + config.shrinkage * gamma * h
        stages.append((gamma, tree))
        trace.append(float(w @ _loss_values(config.loss, y, F)))
    return BoostedModel(
        f0=f0,
        stages=tuple(stages),
        shrinkage=config.shrinkage,
        alpha=alpha,
        loss=config.loss,
        n_features=X.shape[1],
        loss_trace=tuple(trace),
    )


def fit_gradient_boosting(X: np.ndarray, y: np.ndarray, config: TrainConfig) -> BoostedModel:
    """Standard gradient boosting: uniform unit weights on one training set."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) != len(y) or len(y) < 1:
        raise ValueError("X and y must be nonempty and aligned")
    return _boost(X, y, np.ones(len(y)), config, alpha=0.0)


def fit_gbbw(
    source_X: np.ndarray,
    source_y: np.ndarray,
    target_X: np.ndarray,
    target_y: np.ndarray,
    config: TrainConfig,
) -> BoostedModel:
    """Balanced-weighting gradient boosting over source and pseudo-target sets.

    Instance weights are (1 - alpha) on source rows and alpha on pseudo-target
    rows. At the boundaries the irrelevant set is excluded outright, so the
    alpha = 0 model is bit-identical to standard gradient boosting on the
    source set and invariant to the pseudo-target contents (and symmetrically
    for alpha = 1).
    """
    source_X = np.asarray(source_X, dtype=float)
    source_y = np.asarray(source_y, dtype=float)
    target_X = np.asarray(target_X, dtype=float)
    target_y = np.asarray(target_y, dtype=float)
    n1, n2 = len(source_y), len(target_y)
    if n1 < 1:
        raise ValueError("source set must be nonempty")
    if len(source_X) != n1 or len(target_X) != n2:
        raise ValueError("features and labels must align")
    alpha = config.alpha
    if alpha == 1.0 and n2 == 0:
        raise ValueError("alpha = 1 requires a nonempty pseudo-target set")
    if n2 == 0 and alpha > 0.0:
        raise ValueError("empty pseudo-target set is only valid with alpha = 0")

    if alpha == 0.0:
        X, y, w = source_X, source_y, np.full(n1, 1.0 - alpha)
    elif alpha == 1.0:
        X, y, w = target_X, target_y, np.full(n2, alpha)
    else:
        X = np.vstack([source_X, target_X])
        y = np.concatenate([source_y, target_y])
        w = np.concatenate([np.full(n1, 1.0 - alpha), np.full(n2, alpha)])
    return _boost(X, y, w, config, alpha=alpha)


def predict(model: BoostedModel, X: np.ndarray, clamp_at_zero: bool = False) -> np.ndarray:
    """Evaluate the staged additive model; optionally clamp counts at zero."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got shape {X.shape}")
    F = np.full(len(X), model.f0)
    for gamma, tree in model.stages:
        F += model.shrinkage * gamma * tree.predict(X)
    return np.maximum(F, 0.0) if clamp_at_zero else F


def save_model(model: BoostedModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "f0": model.f0,
        "shrinkage": model.shrinkage,
        "alpha": model.alpha,
        "loss": model.loss,
        "n_features": model.n_features,
        "stages": [{"gamma": g, "tree": t.to_dict()} for g, t in model.stages],
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_model(path: str | Path) -> BoostedModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model file: {payload.get('format')!r} v{payload.get('version')!r}")
    stages = tuple(
        (float(s["gamma"]), RegressionTree.from_dict(s["tree"])) for s in payload["stages"]
    )
    return BoostedModel(
        f0=float(payload["f0"]),
        stages=stages,
        shrinkage=float(payload["shrinkage"]),
        alpha=float(payload["alpha"]),
        loss=str(payload["loss"]),
        n_features=int(payload["n_features"]),
    )
