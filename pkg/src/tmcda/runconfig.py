"""Flat key-value run configuration files with dotted section keys.

Lines look like ``gmm.n_components = 4``; ``#`` starts a comment. Unknown
keys are hard errors, reported all at once so a sweep cannot silently run
with a misspelled setting.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .boosting import TrainConfig
from .pipeline import GmmSettings, ItmlSettings, LassoSettings, PipelineConfig


class ConfigError(ValueError):
    """Invalid run configuration."""


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_int(text: str):
    return None if text.lower() == "none" else int(text)


def _parse_optional_float(text: str):
    return None if text.lower() == "none" else float(text)


# key -> (section, field, parser)
_KEYS = {
    "seed": (None, "master_seed", int),
    "pipeline.variant": (None, "variant", str),
    "pipeline.clamp": (None, "clamp_predictions", _parse_bool),
    "pipeline.round": (None, "round_predictions", _parse_bool),
    "pipeline.exclude_matched": (None, "exclude_matched_from_source", _parse_bool),
    "lasso.lambda_mode": ("lasso", "lambda_mode", str),
    "lasso.lambda_value": ("lasso", "lambda_value", float),
    "lasso.cv_folds": ("lasso", "cv_folds", int),
    "lasso.cv_grid_size": ("lasso", "cv_grid_size", int),
    "lasso.lam_min_ratio": ("lasso", "lam_min_ratio", float),
    "lasso.tol": ("lasso", "tol", float),
    "lasso.max_sweeps": ("lasso", "max_sweeps", int),
    "itml.gamma": ("itml", "gamma", float),
    "itml.max_passes": ("itml", "max_passes", int),
    "itml.tol": ("itml", "tol", float),
    "itml.percentile": ("itml", "percentile", float),
    "itml.max_constraints": ("itml", "max_constraints", int),
    "itml.n_candidates": ("itml", "n_candidates", int),
    "gmm.n_components": ("gmm", "n_components", _parse_optional_int),
    "gmm.n_samples": ("gmm", "n_samples", _parse_optional_int),
    "gmm.tol": ("gmm", "tol", float),
    "gmm.max_iter": ("gmm", "max_iter", int),
    "gmm.n_init": ("gmm", "n_init", int),
    "gmm.ridge": ("gmm", "ridge", _parse_optional_float),
    "boosting.n_stages": ("boosting", "n_stages", int),
    "boosting.max_depth": ("boosting", "max_depth", int),
    "boosting.min_samples_leaf": ("boosting", "min_samples_leaf", int),
    "boosting.shrinkage": ("boosting", "shrinkage", float),
    "boosting.alpha": ("boosting", "alpha", float),
}

_GRID_KEYS = ("grid.n_components", "grid.n_samples", "grid.alpha")


def parse_flat_file(path: str | Path) -> dict[str, str]:
    """Read key = value lines; later duplicates override earlier ones."""
    entries: dict[str, str] = {}
    problems = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key] = value
    if problems:
        raise ConfigError("; ".join(problems))
    return entries


def _apply_entries(entries: dict[str, str], allow_grid: bool) -> tuple[PipelineConfig, dict]:
    unknown = [k for k in entries if k not in _KEYS and not (allow_grid and k in _GRID_KEYS)]
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {sorted(unknown)}")

    sections = {"lasso": {}, "itml": {}, "gmm": {}, "boosting": {}}
    top = {}
    problems = []
    for key, text in entries.items():
        if key in _GRID_KEYS:
            continue
        section, fname, parser = _KEYS[key]
        try:
            value = parser(text)
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
            continue
        if section is None:
            top[fname] = value
        else:
            sections[section][fname] = value
    if problems:
        raise ConfigError("; ".join(problems))

    grid = {}
    if allow_grid:
        for key in _GRID_KEYS:
            if key in entries:
                axis = key.split(".", 1)[1]
                parser = float if axis == "alpha" else int
                try:
                    grid[axis] = [parser(v.strip()) for v in entries[key].split(",") if v.strip()]
                except ValueError as exc:
                    raise ConfigError(f"{key}: {exc}") from None

    try:
        config = PipelineConfig(
            lasso=LassoSettings(**sections["lasso"]),
            itml=ItmlSettings(**sections["itml"]),
            gmm=GmmSettings(**sections["gmm"]),
            boosting=TrainConfig(**sections["boosting"]),
            **top,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return config, grid


def load_config(path: str | Path | None) -> PipelineConfig:
    """Build a pipeline configuration from a flat file (defaults if None)."""
    if path is None:
        return PipelineConfig()
    config, _ = _apply_entries(parse_flat_file(path), allow_grid=False)
    return config


def load_grid_config(path: str | Path) -> tuple[PipelineConfig, dict]:
    """Build the base configuration and sweep grid from one flat file."""
    return _apply_entries(parse_flat_file(path), allow_grid=True)


def for_movement(config: PipelineConfig, movement: str) -> PipelineConfig:
    return replace(config, movement=movement)


def for_variant(config: PipelineConfig, variant: str) -> PipelineConfig:
    return replace(config, variant=variant)
