"""Per-instance strategy labels, selector training and dynamic dispatch."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .classifiers import (
    ConstantClassifier,
    KnnClassifier,
    LinearClassifier,
    MlpClassifier,
    TimeSeriesForest,
)
from .errors import FingerprintMismatchError, InvalidInputError, InvalidParameterError
from .evaluation import metric_rows

CLASSIFIER_KINDS = ("linear", "mlp", "knn", "ts-forest")


@dataclass(frozen=True)
class StrategyLabels:
    labels: np.ndarray
    loss_used: str = "mse"
    tie_policy: str = "lowest-index"

    def __len__(self):
        return len(self.labels)


def labels_from_losses(losses, loss_used="mse"):
    """Row-wise argmin; ``np.argmin`` keeps the first (lowest) index on ties."""
    losses = np.asarray(losses, dtype=np.float64)
    return StrategyLabels(np.argmin(losses, axis=1).astype(np.intp), loss_used)


def compute_labels(strategy_set, data, loss="mse", forecasts=None):
    """Index of the strategy with the smallest ``loss`` on every instance.

    ``loss`` names a metric from :mod:`dystrat.evaluation` or is a callable
    ``(Y, Yhat) -> per-row losses``. Precomputed ``forecasts`` of shape
    (n_strategies, n, H) skip the forward passes.
    """
    if (strategy_set.w, strategy_set.H) != (data.w, data.H):
        raise InvalidInputError(
            f"data (w={data.w}, H={data.H}) does not match strategies "
            f"(w={strategy_set.w}, H={strategy_set.H})"
        )
    if forecasts is None:
        forecasts = strategy_set.forecast_all(data.inputs)
    fn = loss if callable(loss) else (lambda Y, F: metric_rows(Y, F, loss))
    losses = np.column_stack([fn(data.targets, f) for f in forecasts])
    name = getattr(loss, "__name__", str(loss))
    return labels_from_losses(losses, name)


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "ts-forest"
    # linear
    learning_rate: float = 0.05
    epochs: int = 300
    l2: float = 1e-4
    # mlp
    hidden_width: int = 100
    mlp_learning_rate: float = 1e-3
    mlp_epochs: int = 200
    # knn
    k: int = 5
    metric: str = "euclidean"
    # ts-forest
    n_trees: int = 100
    n_intervals_per_tree: int | None = None
    min_interval_length: int = 3
    max_depth: int | None = None
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.kind not in CLASSIFIER_KINDS:
            raise InvalidParameterError(f"unknown classifier kind {self.kind!r}")
        if self.k < 1 or self.n_trees < 1 or self.min_interval_length < 1:
            raise InvalidParameterError("k, n_trees and min_interval_length must be >= 1")
        if not self.name:
            object.__setattr__(self, "name", "ds_" + self.kind.replace("ts-forest", "tsf"))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def build(self, w=None):
        if self.kind == "linear":
            return LinearClassifier(self.learning_rate, self.epochs, self.l2, self.seed)
        if self.kind == "mlp":
            return MlpClassifier(self.hidden_width, self.mlp_learning_rate, self.mlp_epochs, self.seed)
        if self.kind == "knn":
            return KnnClassifier(self.k, self.metric)
        if w is not None and self.min_interval_length > w:
            raise InvalidParameterError(
                f"min_interval_length {self.min_interval_length} exceeds window {w}"
            )
        return TimeSeriesForest(
            self.n_trees, self.n_intervals_per_tree, self.min_interval_length,
            self.max_depth, self.seed,
        )


@dataclass(frozen=True, eq=False)
class TrainedSelector:
    kind: str
    model: object
    n_classes: int
    w: int
    config: ClassifierConfig = field(default_factory=ClassifierConfig)
    fingerprint: str = ""

    def select(self, x):
        return select(self, x)

    def select_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.w:
            raise InvalidInputError(f"expected windows of length {self.w}, got shape {X.shape}")
        return np.asarray(self.model.predict(X), dtype=np.intp)

    def save(self, path):
        header = {
            "format": "dystrat.selector/1",
            "kind": self.kind,
            "model_kind": self.model.kind,
            "n_classes": self.n_classes,
            "w": self.w,
            "fingerprint": self.fingerprint,
            "config": dataclasses.asdict(self.config),
        }
        np.savez(Path(path), header=np.array(json.dumps(header)), **self.model.get_state())

    @classmethod
    def load(cls, path, strategy_set=None):
        """Load a bundle; with ``strategy_set`` the stored fingerprint must match."""
        with np.load(Path(path)) as z:
            header = json.loads(str(z["header"]))
            state = {k: z[k] for k in z.files if k != "header"}
        if strategy_set is not None and header["fingerprint"] != strategy_set.training_fingerprint:
            raise FingerprintMismatchError(
                f"selector was trained for {header['fingerprint']!r}, "
                f"strategy set is {strategy_set.training_fingerprint!r}"
            )
        config = ClassifierConfig(**header["config"])
        model = ConstantClassifier() if header["model_kind"] == "constant" else config.build()
        model.set_state(state)
        return cls(header["kind"], model, header["n_classes"], header["w"], config, header["fingerprint"])


def train_selector(config: ClassifierConfig, inputs, labels, n_classes=None, fingerprint=""):
    """Fit a classifier on (window, label) pairs.

    If every label is the same class the selector is constant; this is
    deliberate rather than an error.
    """
    X = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(getattr(labels, "labels", labels), dtype=np.intp)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidInputError("need at least one training window")
    if X.shape[0] != y.shape[0]:
        raise InvalidInputError(f"{X.shape[0]} windows but {y.shape[0]} labels")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if y.min() < 0 or y.max() >= n_classes:
        raise InvalidInputError("labels fall outside [0, n_classes)")
    if np.all(y == y[0]):
        model = ConstantClassifier().fit(X, y, n_classes)
    else:
        model = config.build(X.shape[1]).fit(X, y, n_classes)
    return TrainedSelector(config.kind, model, n_classes, X.shape[1], config, fingerprint)


def select(selector: TrainedSelector, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != selector.w:
        raise InvalidInputError(f"expected a window of length {selector.w}")
    return int(selector.select_batch(x[None, :])[0])


@dataclass(frozen=True, eq=False)
class DyStrat:
    selector: TrainedSelector
    strategy_set: object

    def __post_init__(self):
        if self.selector.n_classes != len(self.strategy_set):
            raise InvalidInputError(
                f"selector has {self.selector.n_classes} classes for "
                f"{len(self.strategy_set)} strategies"
            )

    def forecast(self, x):
        return dystrat_forecast(self, x)

    def forecast_batch(self, X, forecasts=None):
        """Dispatch each row to its selected strategy.

        ``forecasts`` may hold the precomputed (n_strategies, n, H) cube.
        """
        X = np.asarray(X, dtype=np.float64)
        chosen = self.selector.select_batch(X)
        if forecasts is None:
            forecasts = self.strategy_set.forecast_all(X)
        return forecasts[chosen, np.arange(X.shape[0])]


def dystrat_forecast(ds: DyStrat, x):
    x = np.asarray(x, dtype=np.float64)
    index = select(ds.selector, x)
    return ds.strategy_set[index].forecast(x)


def tsf_features(x, intervals, min_interval_length=1):
    """(mean, std, slope) per ``[start, end)`` interval, concatenated."""
    x = np.asarray(x, dtype=np.float64)
    w = x.shape[-1]
    starts, ends = [], []
    for start, end in intervals:
        if start < 0 or end > w or end - start < max(1, min_interval_length):
            raise InvalidParameterError(f"interval [{start}, {end}) is invalid for window {w}")
        starts.append(start)
        ends.append(end)
    out = kernels.interval_features(np.atleast_2d(x), starts, ends)
    return out[0] if x.ndim == 1 else out


def default_interval_count(w):
    return math.ceil(math.sqrt(w))
