"""Loss matrices and the statistics derived from them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

METRICS = ("mse", "mae", "mape", "smape", "maxerr")
EPS = 1e-8


def metric_rows(Y, Yhat, metric="mse"):
    """Per-instance metric between aligned rows of ``Y`` and ``Yhat``."""
    Y = np.asarray(Y, dtype=np.float64)
    Yhat = np.asarray(Yhat, dtype=np.float64)
    if Y.shape != Yhat.shape or Y.ndim != 2 or Y.shape[1] < 1:
        raise InvalidInputError(f"shape mismatch: {Y.shape} vs {Yhat.shape}")
    err = np.abs(Y - Yhat)
    if metric == "mse":
        return np.mean(err * err, axis=1)
    if metric == "mae":
        return np.mean(err, axis=1)
    if metric == "mape":
        return np.mean(err / np.maximum(np.abs(Y), EPS), axis=1) * 100.0
    if metric == "smape":
        return np.mean(2.0 * err / np.maximum(np.abs(Y) + np.abs(Yhat), EPS), axis=1) * 100.0
    if metric == "maxerr":
        return np.max(err, axis=1)
    raise InvalidInputError(f"unknown metric {metric!r}")


def point_metrics(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.ndim != 1 or y.shape != yhat.shape or y.size < 1:
        raise InvalidInputError(f"length mismatch: {y.shape} vs {yhat.shape}")
    return {m: float(metric_rows(y[None], yhat[None], m)[0]) for m in METRICS}


@dataclass(frozen=True, eq=False)
class LossMatrix:
    losses: np.ndarray
    column_names: tuple
    metric: str

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=np.float64)
        if losses.ndim != 2 or losses.shape[1] != len(self.column_names):
            raise InvalidInputError("loss matrix shape disagrees with column names")
        if not np.isfinite(losses).all() or (losses < 0).any():
            raise InvalidInputError("losses must be finite and non-negative")
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def instance_count(self):
        return self.losses.shape[0]

    def columns(self, idx):
        return self.losses[:, list(idx)]


def loss_matrix(strategy_set, extra_forecasters, data, metric="mse"):
    """Entry (i, j) = metric(y_i, forecaster_j(x_i)).

    ``extra_forecasters`` maps column names to callables taking the input
    matrix and returning the (n, H) forecasts; they follow the strategy
    columns in insertion order.
    """
    if strategy_set is not None and (strategy_set.w, strategy_set.H) != (data.w, data.H):
        raise InvalidInputError("strategy set and data disagree on (w, H)")
    names, columns = [], []
    for s in strategy_set or ():
        names.append(s.name)
        columns.append(metric_rows(data.targets, s.forecast_batch(data.inputs), metric))
    for name, fn in (extra_forecasters or {}).items():
        names.append(name)
        columns.append(metric_rows(data.targets, fn(data.inputs), metric))
    return LossMatrix(np.column_stack(columns), names, metric)


def loss_matrices_from_forecasts(targets, forecasts, names, metrics=METRICS):
    """One LossMatrix per metric from a (n_columns, n, H) forecast cube."""
    out = {}
    for m in metrics:
        cols = [metric_rows(targets, f, m) for f in forecasts]
        out[m] = LossMatrix(np.column_stack(cols), names, m)
    return out


def oracle_losses(lm: LossMatrix, fixed_columns):
    fixed_columns = list(fixed_columns)
    if not fixed_columns:
        raise InvalidInputError("need at least one fixed column")
    return lm.columns(fixed_columns).min(axis=1)


def oracle_error(lm: LossMatrix, fixed_columns):
    return float(np.mean(oracle_losses(lm, fixed_columns)))


def relative_errors(lm: LossMatrix, fixed_columns):
    """Column means over the oracle mean; NaN everywhere if the oracle is 0."""
    oracle = oracle_error(lm, fixed_columns)
    means = lm.losses.mean(axis=0)
    if oracle == 0:
        return np.full(means.shape, np.nan)
    return means / oracle


def best_fixed(lm: LossMatrix, fixed_columns):
    fixed_columns = list(fixed_columns)
    means = lm.columns(fixed_columns).mean(axis=0)
    return fixed_columns[int(np.argmin(means))]


def dense_rank(values, axis=-1):
    """Dense ranks (1 = smallest) along ``axis``; ties share a rank."""
    values = np.moveaxis(np.asarray(values, dtype=np.float64), axis, -1)
    order = np.argsort(values, axis=-1, kind="stable")
    sorted_vals = np.take_along_axis(values, order, axis=-1)
    steps = np.concatenate(
        [np.ones(sorted_vals.shape[:-1] + (1,), dtype=np.int64),
         (np.diff(sorted_vals, axis=-1) > 0).astype(np.int64)],
        axis=-1,
    )
    ranks_sorted = np.cumsum(steps, axis=-1)
    ranks = np.empty_like(ranks_sorted)
    np.put_along_axis(ranks, order, ranks_sorted, axis=-1)
    return np.moveaxis(ranks, -1, axis)


def dense_rank_instance(lm: LossMatrix):
    """Mean over instances of each column's dense rank."""
    return dense_rank(lm.losses, axis=1).mean(axis=0)


def task_rank(task_means):
    """Dense rank of per-task column means, averaged over tasks."""
    task_means = np.atleast_2d(np.asarray(task_means, dtype=np.float64))
    if task_means.shape[0] < 1:
        raise InvalidInputError("need at least one task")
    return dense_rank(task_means, axis=1).mean(axis=0)


def top1_accuracy(labels, n_columns):
    labels = np.asarray(getattr(labels, "labels", labels), dtype=np.intp)
    if labels.size == 0:
        raise InvalidInputError("labels are empty")
    return np.bincount(labels, minlength=n_columns)[:n_columns] / labels.size


@dataclass
class EvaluationReport:
    column_names: list
    fixed_columns: list
    mean_loss: dict
    relative_mse: np.ndarray
    task_rank: np.ndarray
    mean_instance_rank: np.ndarray
    top1_share: np.ndarray
    gstar_index: int
    oracle_mean: dict
    oracle_relative: float
    degenerate: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def gstar_name(self):
        return self.column_names[self.gstar_index]

    def column(self, name):
        return self.column_names.index(name)

    def relative(self, name):
        return float(self.relative_mse[self.column(name)])

    def rows(self):
        """One record per loss-matrix column, in column order."""
        out = []
        for j, name in enumerate(self.column_names):
            row = {"column_name": name}
            for m, means in self.mean_loss.items():
                row[m] = float(means[j])
            row["relative_mse"] = float(self.relative_mse[j])
            row["task_rank"] = float(self.task_rank[j])
            row["mean_instance_rank"] = float(self.mean_instance_rank[j])
            row["top1_share"] = float(self.top1_share[j])
            out.append(row)
        return out


def evaluate(matrices, fixed_columns, metadata=None) -> EvaluationReport:
    """Assemble a report from per-metric loss matrices sharing their columns.

    Labels, ranks, oracle, g* and top-1 all use the ``mse`` matrix. Top-1
    for fixed columns is the share of instances labelled with that column
    (lowest index wins ties); for other columns it is the share of
    instances where the column attains the fixed-strategy minimum.
    """
    mse = matrices["mse"]
    fixed_columns = list(fixed_columns)
    n_cols = len(mse.column_names)
    oracle = oracle_error(mse, fixed_columns)
    rel = relative_errors(mse, fixed_columns)
    means = {m: lm.losses.mean(axis=0) for m, lm in matrices.items()}

    fixed = mse.columns(fixed_columns)
    labels = np.argmin(fixed, axis=1)
    row_min = fixed.min(axis=1)
    top1 = np.zeros(n_cols)
    shares = top1_accuracy(labels, len(fixed_columns))
    for pos, j in enumerate(fixed_columns):
        top1[j] = shares[pos]
    for j in range(n_cols):
        if j not in fixed_columns:
            top1[j] = float(np.mean(mse.losses[:, j] <= row_min))

    return EvaluationReport(
        column_names=list(mse.column_names),
        fixed_columns=fixed_columns,
        mean_loss=means,
        relative_mse=rel,
        task_rank=task_rank(means["mse"]),
        mean_instance_rank=dense_rank_instance(mse),
        top1_share=top1,
        gstar_index=best_fixed(mse, fixed_columns),
        oracle_mean={m: oracle_error(lm, fixed_columns) for m, lm in matrices.items()},
        oracle_relative=oracle / oracle if oracle > 0 else float("nan"),
        degenerate=oracle == 0,
        metadata=dict(metadata or {}),
    )
