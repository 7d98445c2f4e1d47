"""Command-line entry point: ``dystrat {run,sweep,subset-curve,ablate,gen-data}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
from pathlib import Path

from ..errors import DyStratError
from .config import DatasetConfig, ExperimentConfig, load_config, load_grid
from .report import _json_safe, emit
from .runner import ablate_gstar, build_series, run_experiment, subset_curve, sweep

OUTPUT_ROOT_ENV = "DYSTRAT_OUTPUT_ROOT"
DATASET_ALIASES = {"mg": "mackey-glass", "mackey-glass": "mackey-glass",
                   "lorenz": "lorenz", "sine": "sine"}


def _dataset_override(value, base: DatasetConfig):
    if value in DATASET_ALIASES:
        return DatasetConfig(kind=DATASET_ALIASES[value], n=base.n, normalize=base.normalize)
    path, _, column = value.partition(":")
    return DatasetConfig(kind="csv", path=path, column=column or 0, normalize=base.normalize)


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.repeats is not None:
        changes["repeats"] = args.repeats
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.train_frac is not None:
        changes["train_fraction"] = args.train_frac
    if args.dataset is not None:
        changes["dataset"] = _dataset_override(args.dataset, cfg.dataset)
    return cfg.replace(**changes) if changes else cfg


def _out_dir(args, cfg):
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", cfg.name).strip("_")
    return root / f"{safe}_{cfg.digest()}"


def _print_summary(run):
    agg = run.aggregate()
    print(f"{'column':<12}{'mse':>12}{'relative':>16}{'top1':>8}{'rank':>8}")
    for name, s in agg.items():
        rel = f"{s['relative_mse'][0]:.3f}±{s['relative_mse'][1]:.3f}"
        print(f"{name:<12}{s['mse'][0]:>12.3e}{rel:>16}{s['top1_share'][0]:>8.3f}"
              f"{s['mean_instance_rank'][0]:>8.2f}")
    if run.errors:
        print(f"{len(run.errors)} repeat(s) failed", file=sys.stderr)


def cmd_run(args):
    cfg = resolve_config(args)
    run = run_experiment(cfg)
    extra = {}
    if cfg.ablate_gstar:
        extra["ablation"] = vars(ablate_gstar(cfg, run))
    if cfg.subset_curve is not None:
        extra["subset_curve"] = vars(subset_curve(cfg, run=run))
    paths = emit(run, _out_dir(args, cfg), force=args.force, extra=extra)
    _print_summary(run)
    print(f"wrote {len(paths)} files to {paths[0].parent}")


def cmd_sweep(args):
    if not args.config:
        raise DyStratError("sweep needs --config with a grid section")
    grid = load_grid(args.config)
    overrides = resolve_config(argparse.Namespace(**{**vars(args), "config": None}))
    changes = {k: getattr(overrides, k) for k in ("base_seed", "repeats")
               if getattr(args, {"base_seed": "seed"}.get(k, k)) is not None}
    grid = [c.replace(**changes) for c in grid]
    result = sweep(grid)
    out = _out_dir(args, grid[0])
    for i, run in enumerate(result.results):
        emit(run, out / f"cell{i:02d}", force=args.force, bundles=False)
    table = out / "rank_table.csv"
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column_name", "task_rank"])
        for name, rank in result.rank_table.items():
            w.writerow([name, repr(rank)])
    (out / "sweep.json").write_text(json.dumps(_json_safe({
        "cells": [r.config.name for r in result.results],
        "failures": result.failures,
        "common_columns": result.common_columns,
        "rank_table": result.rank_table,
    }), indent=2))
    for name, rank in sorted(result.rank_table.items(), key=lambda kv: kv[1]):
        print(f"{name:<12}{rank:8.2f}")


def cmd_subset_curve(args):
    cfg = resolve_config(args)
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None
    run = run_experiment(cfg.replace(repeats=1))
    curve = subset_curve(cfg, sizes, args.samples, run=run)
    out = _out_dir(args, cfg)
    emit(run, out, force=args.force, extra={"subset_curve": vars(curve)}, bundles=False)
    with open(out / "subset_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pool", "size", "median", "q25", "q75"])
        for k, q in curve.quantiles.items():
            w.writerow(["full", k, repr(q["median"]), repr(q["q25"]), repr(q["q75"])])
        if curve.restricted:
            for k, q in curve.restricted["quantiles"].items():
                w.writerow([curve.restricted["mode"], k, repr(q["median"]), repr(q["q25"]), repr(q["q75"])])
    for k, q in curve.quantiles.items():
        print(f"|S|={k:<4} median={q['median']:.4f} IQR=[{q['q25']:.4f}, {q['q75']:.4f}]")


def cmd_ablate(args):
    cfg = resolve_config(args)
    run = run_experiment(cfg)
    result = ablate_gstar(cfg, run, classifier=args.classifier)
    emit(run, _out_dir(args, cfg), force=args.force, extra={"ablation": vars(result)})
    for key, (m, s) in result.summary().items():
        print(f"{key:<18}{m:.3f} ± {s:.3f}")


def cmd_gen_data(args):
    cfg = resolve_config(args)
    series = build_series(cfg, cfg.base_seed)
    out = Path(args.out or f"{series.name}_seed{cfg.base_seed}.csv")
    if out.exists() and not args.force:
        raise DyStratError(f"{out} exists; pass --force to overwrite")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value"])
        for v in series.values:
            w.writerow([repr(float(v))])
    print(f"wrote {len(series)} values to {out}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--repeats", type=int)
    common.add_argument("--out", help="output directory (default: $%s/<name>_<hash>)" % OUTPUT_ROOT_ENV)
    common.add_argument("--force", action="store_true", help="overwrite existing output")
    common.add_argument("--dataset", help="mackey-glass | lorenz | sine | path.csv[:column]")
    common.add_argument("--horizon", type=int)
    common.add_argument("--train-frac", type=float, dest="train_frac")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dystrat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one experiment").set_defaults(func=cmd_run)
    sub.add_parser("sweep", parents=[common], help="run a config grid").set_defaults(func=cmd_sweep)
    p = sub.add_parser("subset-curve", parents=[common], help="error vs candidate-pool size")
    p.add_argument("--sizes", help="comma-separated pool sizes")
    p.add_argument("--samples", type=int, help="subsets drawn per size")
    p.set_defaults(func=cmd_subset_curve)
    p = sub.add_parser("ablate", parents=[common], help="remove g* from the pool")
    p.add_argument("--classifier", default="ds_tsf")
    p.set_defaults(func=cmd_ablate)
    sub.add_parser("gen-data", parents=[common], help="write a synthetic series to CSV").set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        args.func(args)
    except DyStratError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
