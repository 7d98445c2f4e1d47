"""Writing run results to disk: CSV reports, JSON sidecar, model bundles.

Per-seed CSVs contain only deterministic quantities, so identical configs
produce byte-identical files. Wall-clock timings live in the sidecar.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from ..errors import DyStratError
from .config import ExperimentConfig

REPORT_FIELDS = (
    "column_name", "mse", "mae", "mape", "smape", "maxerr",
    "relative_mse", "task_rank", "mean_instance_rank", "top1_share",
)


class EmitError(DyStratError, OSError):
    pass


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _json_safe(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_report_csv(report, path, metrics):
    fields = [f for f in REPORT_FIELDS if f not in ("mse", "mae", "mape", "smape", "maxerr") or f in metrics]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in report.rows():
            writer.writerow([_fmt(row[f]) for f in fields])


def write_aggregate_csv(run, path):
    agg = run.aggregate()
    keys = [k for k in REPORT_FIELDS[1:] if k in next(iter(agg.values()))]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["column_name", *keys, *(f"{k}_std" for k in keys)])
        for name, stats in agg.items():
            writer.writerow(
                [name, *(_fmt(stats[k][0]) for k in keys), *(_fmt(stats[k][1]) for k in keys)]
            )


def sidecar(run, extra=None):
    cfg = run.config
    return _json_safe({
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seeds": run.seeds,
        "errors": run.errors,
        "timings": run.timings,
        "oracle_mean": [r.oracle_mean for r in run.reports],
        "oracle_relative": [r.oracle_relative for r in run.reports],
        "gstar": [r.gstar_name for r in run.reports],
        "per_seed": [
            {"seed": s, "metadata": r.metadata, "rows": r.rows()}
            for s, r in zip(run.seeds, run.reports)
        ],
        "aggregate": {
            name: {k: {"mean": m, "std": sd} for k, (m, sd) in stats.items()}
            for name, stats in run.aggregate().items()
        },
        **(extra or {}),
    })


def read_sidecar_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text())["config"])


def emit(run, out_dir, force=False, extra=None, bundles=True):
    """Write every artefact of ``run`` under ``out_dir``; returns the paths.

    Refuses to write into a non-empty directory unless ``force``.
    """
    out = Path(out_dir)
    try:
        if out.exists() and any(out.iterdir()) and not force:
            raise EmitError(f"{out} is not empty; pass force=True (--force) to overwrite")
        out.mkdir(parents=True, exist_ok=True)
        h = run.config.digest()
        paths = []
        agg = out / f"report_{h}.csv"
        write_aggregate_csv(run, agg)
        paths.append(agg)
        for seed, report in zip(run.seeds, run.reports):
            p = out / f"report_{h}_seed{seed}.csv"
            write_report_csv(report, p, run.config.metrics)
            paths.append(p)
        side = out / f"report_{h}.json"
        side.write_text(json.dumps(sidecar(run, extra), indent=2, sort_keys=True))
        paths.append(side)
        if bundles:
            for art in run.artifacts:
                p = out / f"strategies_{h}_seed{art.seed}.npz"
                art.strategy_set.save(p)
                paths.append(p)
                for name, sel in art.selectors.items():
                    p = out / f"selector_{h}_seed{art.seed}_{name}.npz"
                    sel.save(p)
                    paths.append(p)
        return paths
    except OSError as exc:
        if isinstance(exc, EmitError):
            raise
        raise EmitError(f"writing results to {out}: {exc}") from exc
