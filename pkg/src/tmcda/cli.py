"""Command-line front end: synthetic data, feature selection, evaluation, sweeps.

Every run writes its outputs atomically together with a manifest recording
the configuration snapshot, master seed, schema version and input digests.
Exit codes: 0 success, 2 usage, 3 validation, 4 runtime stage failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

from . import lasso, runconfig
from .dataset import DataError, load_table, write_table
from .pipeline import VARIANTS, PipelineConfig, ablation_sweep, leave_one_out, render_summary
from .schema import MOVEMENTS, SCHEMA_VERSION
from .synth import generate_synthetic_network

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


class ValidationFailure(Exception):
    pass


class RuntimeFailure(Exception):
    pass


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digest_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, seed: int, config: dict,
                    inputs: list[Path], outputs: list[Path]) -> Path:
    manifest = {
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "schema_version": SCHEMA_VERSION,
        "master_seed": seed,
        "config": config,
        "inputs": {str(p): _digest_file(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    path = out_dir / "manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def _movements(arg: str) -> list[str]:
    return list(MOVEMENTS) if arg == "all" else [arg]


def _variants(arg: str) -> list[str]:
    return list(VARIANTS) if arg == "all" else [arg]


def _load_base_config(args) -> PipelineConfig:
    config = runconfig.load_config(getattr(args, "config", None))
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    return config


def cmd_synth(args) -> int:
    if args.n_intersections < 2:
        raise ValidationFailure("--n-intersections must be >= 2")
    data = generate_synthetic_network(args.seed, args.n_intersections, args.shift, args.n_intervals)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    write_table(data, tmp)
    os.replace(tmp, out)
    print(f"wrote {data.n} rows ({args.n_intersections} intersections) to {out}")
    return EXIT_OK


def cmd_select(args) -> int:
    try:
        data = load_table(args.data)
    except (DataError, OSError) as exc:
        raise ValidationFailure(f"{args.data}: {exc}") from exc
    if data.labels is None:
        raise ValidationFailure("feature selection needs a labeled dataset")
    out_dir = Path(args.out_dir)
    movements = tuple(_movements(args.movement))
    models = {}
    for movement in movements:
        y = data.movement_labels(movement).astype(float)
        if args.lambda_mode == "cv":
            lam, _, _ = lasso.cross_validate_lambda(data.X, y, seed=args.seed or 0)
        elif args.lambda_mode == "fraction":
            lam = args.lambda_value * lasso.lambda_max(data.X, y)
        else:
            lam = args.lambda_value
        models[movement] = lasso.fit_lasso(data.X, y, lam)
    report = lasso.coefficient_report(models, data.schema, movements)
    out = out_dir / "coefficients.csv"
    _atomic_write(out, report)
    _write_manifest(out_dir, "select", args.seed or 0,
                    {"lambda_mode": args.lambda_mode, "lambda_value": args.lambda_value},
                    [Path(args.data)], [out])
    print(f"wrote {out}")
    return EXIT_OK


def _loo_configs(base: PipelineConfig, movements: list[str], variants: list[str]) -> list[PipelineConfig]:
    configs = []
    for variant in variants:
        for movement in movements:
            configs.append(
                runconfig.for_variant(runconfig.for_movement(base, movement), variant)
            )
    return configs


def cmd_loo(args) -> int:
    try:
        base = _load_base_config(args)
        data = load_table(args.data)
    except (runconfig.ConfigError, DataError, OSError) as exc:
        raise ValidationFailure(str(exc)) from exc
    if data.labels is None:
        raise ValidationFailure("leave-one-out evaluation needs a labeled dataset")
    configs = _loo_configs(base, _movements(args.movement), _variants(args.variant))
    report = leave_one_out(data, configs, jobs=args.jobs)
    out_dir = Path(args.out_dir)
    summary = out_dir / "summary.csv"
    folds = out_dir / "folds.csv"
    _atomic_write(summary, render_summary(report))
    _atomic_write(folds, report.to_long_text())
    _write_manifest(out_dir, "loo", base.master_seed, asdict(base),
                    [Path(args.data)], [summary, folds])
    failures = [r for r in report.rows if r.error is not None]
    print(f"wrote {summary} and {folds} ({len(report.rows)} rows, {len(failures)} failed)")
    if failures and len(failures) == len(report.rows):
        raise RuntimeFailure("every fold failed; see folds.csv")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        base, grid = runconfig.load_grid_config(args.grid)
        if args.config:
            base = runconfig.load_config(args.config)
        if args.seed is not None:
            base = replace(base, master_seed=args.seed)
        data = load_table(args.data)
    except (runconfig.ConfigError, DataError, OSError) as exc:
        raise ValidationFailure(str(exc)) from exc
    if data.labels is None:
        raise ValidationFailure("sweeps need a labeled dataset")
    configs = [runconfig.for_movement(base, m) for m in _movements(args.movement)]
    result = ablation_sweep(data, grid, configs, jobs=args.jobs)
    out_dir = Path(args.out_dir)
    out = out_dir / "sweep.csv"
    _atomic_write(out, result.to_text())
    _write_manifest(out_dir, "sweep", base.master_seed,
                    {"base": asdict(base), "grid": grid},
                    [Path(args.data), Path(args.grid)], [out])
    skipped = sum(1 for c in result.cells if c.status == "skipped")
    print(f"wrote {out} ({len(result.cells)} cells, {skipped} skipped)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmcda",
        description="Turning-movement-count estimation with instance-based domain adaptation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic intersection network")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-intersections", type=int, default=6)
    p.add_argument("--shift", type=float, default=1.0)
    p.add_argument("--n-intervals", type=int, default=96)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select", help="fit per-movement coefficients and emit the table")
    p.add_argument("--data", required=True)
    p.add_argument("--movement", choices=[*MOVEMENTS, "all"], default="all")
    p.add_argument("--lambda-mode", choices=["cv", "fixed", "fraction"], default="cv")
    p.add_argument("--lambda-value", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("loo", help="leave-one-intersection-out evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--movement", choices=[*MOVEMENTS, "all"], default="all")
    p.add_argument("--variant", choices=[*VARIANTS, "all"], default="all")
    p.set_defaults(func=cmd_loo)

    p = sub.add_parser("sweep", help="grid sweep over mixture size, samples and alpha")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--movement", choices=[*MOVEMENTS, "all"], default="all")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # stage/runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
