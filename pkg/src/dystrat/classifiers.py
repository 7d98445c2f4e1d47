"""Window classifiers used as strategy selectors.

All of them predict integer classes in ``[0, n_classes)`` and break any
internal tie toward the lowest class index.
"""
from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import InvalidParameterError
from .mlp import MlpConfig, _forward, fit_network


class ConstantClassifier:
    """Used when the training labels contain a single class."""

    kind = "constant"

    def __init__(self, label=0):
        self.label = int(label)

    def fit(self, X, y, n_classes):
        self.label = int(np.asarray(y)[0])
        return self

    def predict(self, X):
        return np.full(np.asarray(X).shape[0], self.label, dtype=np.intp)

    def get_state(self):
        return {"label": np.array(self.label)}

    def set_state(self, state):
        self.label = int(state["label"])
        return self


def _standardize_stats(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


class LinearClassifier:
    """One-vs-rest logistic regression with L2, fit by full-batch Adam on
    standardised inputs."""

    kind = "linear"

    def __init__(self, learning_rate=0.05, epochs=300, l2=1e-4, seed=0):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.seed = seed

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.intp)
        n, d = X.shape
        self.mean_, self.scale_ = _standardize_stats(X)
        Z = (X - self.mean_) / self.scale_
        T = np.zeros((n, n_classes))
        T[np.arange(n), y] = 1.0
        rng = np.random.default_rng(self.seed)
        W = rng.normal(0.0, 0.01, (d, n_classes))
        b = np.zeros(n_classes)
        mW, vW, mb, vb = (np.zeros_like(W), np.zeros_like(W), np.zeros_like(b), np.zeros_like(b))
        for t in range(1, self.epochs + 1):
            logits = Z @ W + b
            p = 0.5 * (1.0 + np.tanh(0.5 * logits))
            g = (p - T) / n
            gW = Z.T @ g + self.l2 * W
            gb = g.sum(axis=0)
            lr = self.learning_rate * math.sqrt(1 - 0.999**t) / (1 - 0.9**t)
            for param, grad, m, v in ((W, gW, mW, vW), (b, gb, mb, vb)):
                m *= 0.9
                m += 0.1 * grad
                v *= 0.999
                v += 0.001 * grad * grad
                param -= lr * m / (np.sqrt(v) + 1e-8)
        self.W_, self.b_ = W, b
        return self

    def decision_function(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_
        return Z @ self.W_ + self.b_

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def get_state(self):
        return {"mean": self.mean_, "scale": self.scale_, "W": self.W_, "b": self.b_}

    def set_state(self, state):
        self.mean_, self.scale_ = state["mean"], state["scale"]
        self.W_, self.b_ = state["W"], state["b"]
        return self


class MlpClassifier:
    """Softmax head on the package's one-hidden-layer network."""

    kind = "mlp"

    def __init__(self, hidden_width=100, learning_rate=1e-3, epochs=200, seed=0):
        self.config = MlpConfig(
            hidden_width=hidden_width, learning_rate=learning_rate,
            max_epochs=epochs, seed=seed,
        )

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.intp)
        T = np.zeros((len(y), n_classes))
        T[np.arange(len(y)), y] = 1.0
        self.params_, self.loss_curve_ = fit_network(X, T, self.config, loss="cross_entropy")
        return self

    def predict(self, X):
        return np.argmax(_forward(self.params_, np.asarray(X, dtype=np.float64))[-1], axis=1)

    def get_state(self):
        return dict(zip(("W1", "b1", "W2", "b2"), self.params_))

    def set_state(self, state):
        self.params_ = [np.asarray(state[k]) for k in ("W1", "b1", "W2", "b2")]
        return self


class KnnClassifier:
    """Majority vote among the k nearest training windows (Euclidean).

    Equal distances keep training order; vote ties go to the lowest class.
    """

    kind = "knn"

    def __init__(self, k=5, metric="euclidean", chunk_bytes=1 << 24):
        if k < 1:
            raise InvalidParameterError("k must be >= 1")
        if metric != "euclidean":
            raise InvalidParameterError(f"unsupported metric {metric!r}")
        self.k = k
        self.metric = metric
        self.chunk_bytes = chunk_bytes

    def fit(self, X, y, n_classes):
        self.X_ = np.array(X, dtype=np.float64)
        self.y_ = np.asarray(y, dtype=np.intp)
        self.n_classes_ = n_classes
        return self

    def kneighbors(self, X):
        X = np.asarray(X, dtype=np.float64)
        n_train, d = self.X_.shape
        k = min(self.k, n_train)
        step = max(1, self.chunk_bytes // (8 * n_train * d))
        out = np.empty((X.shape[0], k), dtype=np.intp)
        for start in range(0, X.shape[0], step):
            diff = X[start:start + step, None, :] - self.X_[None, :, :]
            dist = np.einsum("ijk,ijk->ij", diff, diff)
            out[start:start + step] = np.argsort(dist, axis=1, kind="stable")[:, :k]
        return out

    def predict(self, X):
        neigh = self.y_[self.kneighbors(X)]
        votes = np.zeros((neigh.shape[0], self.n_classes_), dtype=np.int64)
        np.add.at(votes, (np.arange(neigh.shape[0])[:, None], neigh), 1)
        return np.argmax(votes, axis=1)

    def get_state(self):
        return {"X": self.X_, "y": self.y_, "n_classes": np.array(self.n_classes_)}

    def set_state(self, state):
        self.X_, self.y_ = state["X"], state["y"]
        self.n_classes_ = int(state["n_classes"])
        return self


class TimeSeriesForest:
    """Ensemble of gini trees over (mean, std, slope) features of random
    intervals; each tree draws its own intervals. Prediction averages the
    leaf class distributions."""

    kind = "ts-forest"

    def __init__(self, n_trees=100, n_intervals_per_tree=None, min_interval_length=3,
                 max_depth=None, seed=0):
        if n_trees < 1:
            raise InvalidParameterError("n_trees must be >= 1")
        self.n_trees = n_trees
        self.n_intervals_per_tree = n_intervals_per_tree
        self.min_interval_length = min_interval_length
        self.max_depth = max_depth
        self.seed = seed

    def sample_intervals(self, w, rng):
        min_len = min(self.min_interval_length, w)
        count = self.n_intervals_per_tree or math.ceil(math.sqrt(w))
        lengths = rng.integers(min_len, w + 1, size=count)
        starts = np.array([rng.integers(0, w - L + 1) for L in lengths], dtype=np.intp)
        return starts, starts + lengths

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.intp)
        self.w_ = X.shape[1]
        self.n_classes_ = n_classes
        rng = np.random.default_rng(self.seed)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        self.intervals_ = []
        self.trees_ = []
        for _ in range(self.n_trees):
            starts, ends = self.sample_intervals(self.w_, rng)
            feats = kernels.interval_features(X, starts, ends)
            self.intervals_.append((starts, ends))
            self.trees_.append(kernels.build_tree(feats, y, n_classes, depth, 1))
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        total = np.zeros((X.shape[0], self.n_classes_))
        for (starts, ends), (feature, threshold, left, right, value) in zip(
            self.intervals_, self.trees_
        ):
            feats = kernels.interval_features(X, starts, ends)
            leaves = kernels.apply_tree(feats, feature, threshold, left, right)
            counts = value[leaves]
            total += counts / counts.sum(axis=1, keepdims=True)
        return total / len(self.trees_)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def get_state(self):
        state = {"w": np.array(self.w_), "n_classes": np.array(self.n_classes_)}
        for t, ((starts, ends), tree) in enumerate(zip(self.intervals_, self.trees_)):
            state[f"t{t}_starts"] = starts
            state[f"t{t}_ends"] = ends
            for name, arr in zip(("feature", "threshold", "left", "right", "value"), tree):
                state[f"t{t}_{name}"] = arr
        return state

    def set_state(self, state):
        self.w_ = int(state["w"])
        self.n_classes_ = int(state["n_classes"])
        self.intervals_, self.trees_ = [], []
        for t in range(self.n_trees):
            self.intervals_.append((state[f"t{t}_starts"], state[f"t{t}_ends"]))
            self.trees_.append(tuple(
                state[f"t{t}_{name}"] for name in ("feature", "threshold", "left", "right", "value")
            ))
        return self
