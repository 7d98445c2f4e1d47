"""End-to-end experiment orchestration."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .. import data as D
from ..errors import DyStratError, InvalidParameterError
from ..evaluation import (
    evaluate,
    loss_matrices_from_forecasts,
    metric_rows,
    task_rank,
)
from ..selector import labels_from_losses, train_selector
from ..strategies import Kind, StrategySet, enumerate_strategies, spec_from_name, train_all
from .config import ExperimentConfig

log = logging.getLogger(__name__)


class PhaseError(DyStratError):
    def __init__(self, phase, seed, cause):
        super().__init__(f"repeat with seed {seed} failed during {phase}: {cause}")
        self.phase = phase
        self.seed = seed
        self.cause = cause


@dataclass
class RepeatArtifacts:
    """Everything a repeat produced that later analyses reuse."""

    seed: int
    strategy_set: StrategySet
    selectors: dict
    train_inputs: np.ndarray
    train_losses: np.ndarray
    eval_inputs: np.ndarray
    eval_targets: np.ndarray
    eval_forecasts: np.ndarray
    eval_losses: np.ndarray


@dataclass
class RunResult:
    config: ExperimentConfig
    reports: list
    seeds: list
    errors: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    @property
    def column_names(self):
        return self.reports[0].column_names if self.reports else []

    def aggregate(self):
        """column -> statistic -> (mean, std) over successful repeats."""
        if not self.reports:
            raise DyStratError("no successful repeats to aggregate")
        out = {}
        for j, name in enumerate(self.column_names):
            stats = {}
            for key, values in _per_repeat(self.reports, j).items():
                arr = np.asarray(values, dtype=np.float64)
                stats[key] = (float(arr.mean()), float(arr.std()))
            out[name] = stats
        return out


def _per_repeat(reports, j):
    values = {m: [r.mean_loss[m][j] for r in reports] for m in reports[0].mean_loss}
    for key in ("relative_mse", "task_rank", "mean_instance_rank", "top1_share"):
        values[key] = [getattr(r, key)[j] for r in reports]
    return values


def build_series(cfg: ExperimentConfig, seed):
    ds = cfg.dataset
    if ds.kind == "mackey-glass":
        return D.generate_mackey_glass(ds.n, ds.params, seed=seed)
    if ds.kind == "lorenz":
        return D.generate_lorenz(ds.n, ds.params, seed=seed)
    if ds.kind == "sine":
        return D.generate_noisy_sine(ds.n, seed=seed, **ds.params)
    return D.load_csv(ds.path, ds.column)


def prepare_data(cfg: ExperimentConfig, seed):
    """Series -> (forecaster train, selector train, eval) windowed sets."""
    series = build_series(cfg, seed)
    w, H = cfg.window, cfg.horizon
    spec = D.SplitSpec(cfg.train_fraction, cfg.eval_fraction)
    if cfg.dataset.normalize == "global":
        series = D.normalize(series)
    elif cfg.dataset.normalize == "train":
        n_inst = len(series) - w - H + 1
        n_eval = D._share(spec.eval_fraction, n_inst)
        n_train = D._share(spec.train_fraction, n_inst - n_eval)
        series = D.normalize(series, slice(0, n_train + w + H - 1))
    windows = D.make_windows(series, w, H)
    train, evaluation = D.split(windows, spec)
    selector_train = train
    if cfg.selector_holdout_fraction > 0:
        n_hold = D._share(cfg.selector_holdout_fraction, len(train))
        if n_hold < 1 or n_hold >= len(train):
            raise InvalidParameterError("selector holdout leaves an empty partition")
        selector_train = train.subset(slice(len(train) - n_hold, len(train)))
        train = train.subset(slice(0, len(train) - n_hold))
    return train, selector_train, evaluation


def strategy_specs(cfg: ExperimentConfig):
    if cfg.strategy_filter:
        return [spec_from_name(n) for n in cfg.strategy_filter]
    return enumerate_strategies(cfg.horizon)


def mse_losses(targets, forecasts):
    return np.column_stack([metric_rows(targets, f, "mse") for f in forecasts])


def run_repeat(cfg: ExperimentConfig, seed, keep_artifacts=True):
    timings = {}
    phase = "data"

    def tick(name, started):
        timings[name] = time.perf_counter() - started

    try:
        t = time.perf_counter()
        train, selector_train, evaluation = prepare_data(cfg, seed)
        tick("data", t)

        phase = "strategies"
        t = time.perf_counter()
        sset = train_all(strategy_specs(cfg), train, cfg.mlp.replace(seed=seed))
        tick("strategies", t)

        phase = "labels"
        t = time.perf_counter()
        train_losses = mse_losses(selector_train.targets, sset.forecast_all(selector_train.inputs))
        labels = labels_from_losses(train_losses)
        tick("labels", t)

        phase = "selectors"
        t = time.perf_counter()
        selectors = {}
        for cc in cfg.classifiers:
            selectors[cc.name] = train_selector(
                cc.replace(seed=seed), selector_train.inputs, labels,
                len(sset), sset.training_fingerprint,
            )
        tick("selectors", t)

        phase = "evaluation"
        t = time.perf_counter()
        cube = sset.forecast_all(evaluation.inputs)
        rows = np.arange(len(evaluation))
        columns = list(cube)
        for sel in selectors.values():
            columns.append(cube[sel.select_batch(evaluation.inputs), rows])
        names = sset.names + list(selectors)
        matrices = loss_matrices_from_forecasts(evaluation.targets, columns, names, cfg.metrics)
        meta = {
            "dataset": cfg.dataset.kind,
            "H": cfg.horizon,
            "w": cfg.window,
            "train_fraction": cfg.train_fraction,
            "seed": seed,
            "n_train": len(train),
            "n_eval": len(evaluation),
            "fingerprint": sset.training_fingerprint,
        }
        report = evaluate(matrices, range(len(sset)), meta)
        tick("evaluation", t)
    except Exception as exc:
        raise PhaseError(phase, seed, exc) from exc

    artifacts = None
    if keep_artifacts:
        artifacts = RepeatArtifacts(
            seed, sset, selectors, selector_train.inputs, train_losses,
            evaluation.inputs, evaluation.targets, cube,
            matrices["mse"].losses[:, : len(sset)],
        )
    return report, timings, artifacts


def run_experiment(cfg: ExperimentConfig, keep_artifacts=True) -> RunResult:
    result = RunResult(cfg, [], [])
    for r in range(cfg.repeats):
        seed = cfg.base_seed + r
        log.info("%s: repeat %d/%d (seed %d)", cfg.name, r + 1, cfg.repeats, seed)
        try:
            report, timings, artifacts = run_repeat(cfg, seed, keep_artifacts)
        except PhaseError as exc:
            log.error("%s", exc)
            result.errors.append({"seed": seed, "phase": exc.phase, "message": str(exc.cause)})
            continue
        result.reports.append(report)
        result.seeds.append(seed)
        result.timings.append(timings)
        if artifacts is not None:
            result.artifacts.append(artifacts)
    if not result.reports:
        raise DyStratError(f"{cfg.name}: every repeat failed: {result.errors}")
    return result


@dataclass
class SweepResult:
    results: list
    failures: list
    common_columns: list
    rank_table: dict


def sweep(grid, keep_artifacts=False) -> SweepResult:
    grid = list(grid)
    if not grid:
        raise InvalidParameterError("sweep needs at least one config")
    results, failures = [], []
    for cfg in grid:
        try:
            results.append(run_experiment(cfg, keep_artifacts))
        except DyStratError as exc:
            failures.append({"name": cfg.name, "message": str(exc)})
    if not results:
        return SweepResult([], failures, [], {})
    common = [c for c in results[0].column_names if all(c in r.column_names for r in results[1:])]
    means = np.array([
        [r.aggregate()[c]["mse"][0] for c in common] for r in results
    ])
    ranks = task_rank(means) if common else np.array([])
    return SweepResult(results, failures, common, dict(zip(common, map(float, ranks))))


def _selector_config(cfg, name):
    for cc in cfg.classifiers:
        if cc.name == name:
            return cc
    raise InvalidParameterError(f"no classifier named {name!r} in config")


def dynamic_relative(art: RepeatArtifacts, pool, classifier_config, oracle):
    """Train a selector restricted to ``pool`` and return its eval relative MSE."""
    pool = list(pool)
    labels = labels_from_losses(art.train_losses[:, pool])
    sel = train_selector(
        classifier_config.replace(seed=art.seed), art.train_inputs, labels, len(pool)
    )
    chosen = np.asarray(pool)[sel.select_batch(art.eval_inputs)]
    losses = art.eval_losses[np.arange(len(chosen)), chosen]
    return float(losses.mean() / oracle)


def pool_indices(sset: StrategySet, mode):
    if mode is None:
        return list(range(len(sset)))
    H = sset.H
    keep = []
    for i, s in enumerate(sset):
        recursive = s.spec.kind is Kind.RECTIFY or (
            s.spec.kind is Kind.RECMO and s.spec.sigma < H
        )
        if mode == "exclude-recursive" and not recursive:
            keep.append(i)
        elif mode == "direct-only" and (
            s.spec.kind is Kind.MO or s.spec.kind is Kind.DIRMO
        ):
            keep.append(i)
    return keep


@dataclass
class SubsetCurve:
    sizes: list
    relative: dict
    oracle_relative: dict
    subsets: dict
    quantiles: dict
    restricted: dict | None = None


def _quantiles(values):
    q25, med, q75 = np.percentile(values, [25, 50, 75])
    return {"median": float(med), "q25": float(q25), "q75": float(q75)}


def _curve(art, pool, sizes, samples, cc, rng):
    oracle = float(art.eval_losses.min(axis=1).mean())
    rel, orel, subsets = {}, {}, {}
    for k in sizes:
        if k < 1 or k > len(pool):
            raise InvalidParameterError(f"subset size {k} outside [1, {len(pool)}]")
        draws = 1 if k == len(pool) else samples
        chosen = [sorted(rng.choice(pool, size=k, replace=False).tolist()) for _ in range(draws)]
        subsets[k] = chosen
        rel[k] = [dynamic_relative(art, c, cc, oracle) for c in chosen]
        orel[k] = [float(art.eval_losses[:, c].min(axis=1).mean() / oracle) for c in chosen]
    return rel, orel, subsets


def subset_curve(cfg: ExperimentConfig, sizes=None, samples_per_size=None, run=None,
                 repeat_index=0, classifier=None, restricted_pool=None) -> SubsetCurve:
    """DyStrat relative error as a function of candidate-pool size.

    Strategies come from one repeat of ``run`` (trained here if absent);
    only the selector is refit per sampled subset. Relative errors are
    normalised by the oracle over the full pool.
    """
    sc = cfg.subset_curve
    sizes = list(sizes if sizes is not None else (sc.sizes if sc else ()))
    samples = samples_per_size or (sc.samples_per_size if sc else 30)
    name = classifier or (sc.classifier if sc else "ds_tsf")
    restricted_pool = restricted_pool or (sc.restricted_pool if sc else None)
    if not sizes:
        raise InvalidParameterError("subset curve needs at least one size")
    cc = _selector_config(cfg, name)
    if run is None:
        run = run_experiment(cfg.replace(repeats=1))
    art = run.artifacts[repeat_index]
    rng = np.random.default_rng(art.seed)
    full = list(range(len(art.strategy_set)))
    rel, orel, subsets = _curve(art, full, sizes, samples, cc, rng)
    curve = SubsetCurve(sizes, rel, orel, subsets, {k: _quantiles(v) for k, v in rel.items()})
    if restricted_pool:
        pool = pool_indices(art.strategy_set, restricted_pool)
        r_sizes = [k for k in sizes if k <= len(pool)]
        r_rel, r_orel, r_sub = _curve(art, pool, r_sizes, samples, cc, rng)
        curve.restricted = {
            "mode": restricted_pool,
            "pool": [art.strategy_set.names[i] for i in pool],
            "relative": r_rel,
            "oracle_relative": r_orel,
            "quantiles": {k: _quantiles(v) for k, v in r_rel.items()},
        }
    return curve


@dataclass
class AblationResult:
    classifier: str
    gstar: list
    gstar_relative: list
    ablated_relative: list
    full_relative: list

    def summary(self):
        out = {}
        for key in ("gstar_relative", "ablated_relative", "full_relative"):
            arr = np.asarray(getattr(self, key))
            out[key] = (float(arr.mean()), float(arr.std()))
        return out


def ablate_gstar(cfg: ExperimentConfig, run=None, classifier="ds_tsf") -> AblationResult:
    """Per-seed relative error of g* next to DyStrat trained without g* in its pool."""
    cc = _selector_config(cfg, classifier)
    if run is None:
        run = run_experiment(cfg)
    result = AblationResult(classifier, [], [], [], [])
    for art, report in zip(run.artifacts, run.reports):
        n = len(art.strategy_set)
        if n < 2:
            raise InvalidParameterError("ablation needs at least two strategies")
        source = art.eval_losses if cfg.gstar_split == "eval" else art.train_losses
        g = int(np.argmin(source.mean(axis=0)))
        oracle = float(art.eval_losses.min(axis=1).mean())
        pool = [i for i in range(n) if i != g]
        result.gstar.append(art.strategy_set.names[g])
        result.gstar_relative.append(float(art.eval_losses[:, g].mean() / oracle))
        result.ablated_relative.append(dynamic_relative(art, pool, cc, oracle))
        result.full_relative.append(report.relative(classifier))
    return result
