"""Single-hidden-layer perceptron trained with mini-batch Adam.

This is the base learner behind every forecasting strategy, and (with a
softmax head) one of the selector families. Everything runs in float64.

Training mirrors the usual scikit-learn ``MLPRegressor`` defaults: Glorot
uniform initialisation, Adam with ``lr=1e-3``, batches of ``min(200, n)``,
L2 penalty ``1e-4`` and a plateau stop once the epoch loss fails to improve
by ``tolerance`` for ``n_iter_no_change`` consecutive epochs.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, TrainingDivergedError

_BETA1 = 0.9
_BETA2 = 0.999
_ADAM_EPS = 1e-8

LOSSES = ("squared", "cross_entropy")


@dataclass(frozen=True)
class MlpConfig:
    hidden_width: int = 100
    activation: str = "relu"
    learning_rate: float = 1e-3
    batch_size: int = 200
    max_epochs: int = 200
    l2_penalty: float = 1e-4
    seed: int = 0
    tolerance: float = 1e-4
    n_iter_no_change: int = 10

    def __post_init__(self):
        if self.hidden_width < 1:
            raise InvalidParameterError("hidden_width must be >= 1")
        if self.batch_size < 1:
            raise InvalidParameterError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise InvalidParameterError("max_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidParameterError("learning_rate must be positive")
        if self.l2_penalty < 0 or self.tolerance < 0:
            raise InvalidParameterError("l2_penalty and tolerance must be non-negative")
        if self.activation != "relu":
            raise InvalidParameterError(f"unsupported activation {self.activation!r}")

    def replace(self, **changes) -> "MlpConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class TrainedRegressor:
    """Fitted weights of a one-hidden-layer network.

    ``predict`` takes a single feature vector or a batch (rows) and returns
    outputs of matching rank.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    loss_curve: tuple = ()
    config: MlpConfig = field(default_factory=MlpConfig)

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.W2.shape[1]

    @property
    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise InvalidInputError(
                f"expected {self.input_dim} features, got shape {X.shape}"
            )
        out = _forward(self.params, X)[-1]
        return out[0] if single else out

    def to_arrays(self, prefix=""):
        return {prefix + k: getattr(self, k) for k in ("W1", "b1", "W2", "b2")}

    @classmethod
    def from_arrays(cls, arrays, config, loss_curve=(), prefix=""):
        return cls(
            *(np.array(arrays[prefix + k], dtype=np.float64) for k in ("W1", "b1", "W2", "b2")),
            loss_curve=tuple(loss_curve),
            config=config,
        )

    def save(self, path):
        """Write an ``.npz`` bundle holding weights plus a JSON header."""
        header = {
            "format": "dystrat.regressor/1",
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "config": dataclasses.asdict(self.config),
            "loss_curve": list(self.loss_curve),
        }
        np.savez(Path(path), header=np.array(json.dumps(header)), **self.to_arrays())

    @classmethod
    def load(cls, path):
        with np.load(Path(path)) as z:
            header = json.loads(str(z["header"]))
            return cls.from_arrays(z, MlpConfig(**header["config"]), header["loss_curve"])


def predict(model: TrainedRegressor, x) -> np.ndarray:
    """Forward pass for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("predict expects a 1-d input vector")
    return model.predict(x)


def _forward(params, X):
    W1, b1, W2, b2 = params
    pre = X @ W1 + b1
    hidden = np.maximum(pre, 0.0)
    return pre, hidden, hidden @ W2 + b2


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_gradients(params, X, Y, l2_penalty=0.0, loss="squared"):
    """Penalised empirical risk and its exact gradient w.r.t. ``params``.

    ``squared``: half the mean squared error over all output cells.
    ``cross_entropy``: mean negative log-likelihood of a softmax head, with
    ``Y`` given as one-hot rows.
    The L2 term is ``0.5 * l2 * (|W1|^2 + |W2|^2) / n``.
    """
    W1, b1, W2, b2 = params
    n = X.shape[0]
    pre, hidden, out = _forward(params, X)
    if loss == "squared":
        diff = out - Y
        value = 0.5 * np.mean(diff * diff)
        d_out = diff / diff.size
    elif loss == "cross_entropy":
        prob = _softmax(out)
        value = -np.sum(Y * np.log(np.clip(prob, 1e-300, None))) / n
        d_out = (prob - Y) / n
    else:
        raise InvalidParameterError(f"unknown loss {loss!r}")
    value += 0.5 * l2_penalty * (np.sum(W1 * W1) + np.sum(W2 * W2)) / n

    gW2 = hidden.T @ d_out + l2_penalty * W2 / n
    gb2 = d_out.sum(axis=0)
    d_hidden = (d_out @ W2.T) * (pre > 0)
    gW1 = X.T @ d_hidden + l2_penalty * W1 / n
    gb1 = d_hidden.sum(axis=0)
    return value, [gW1, gb1, gW2, gb2]


def init_params(n_in, n_out, hidden_width, rng):
    params = []
    for fan_in, fan_out in ((n_in, hidden_width), (hidden_width, n_out)):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        params.append(rng.uniform(-bound, bound, fan_out))
    return params


def _check_training_data(X, Y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2:
        raise InvalidInputError("inputs and targets must be 2-d")
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError(
            f"row count mismatch: {X.shape[0]} inputs vs {Y.shape[0]} targets"
        )
    if X.shape[0] < 1:
        raise InvalidInputError("need at least one training instance")
    if not (np.isfinite(X).all() and np.isfinite(Y).all()):
        raise InvalidInputError("training data contains non-finite values")
    return X, Y


def fit_network(X, Y, config: MlpConfig, loss="squared"):
    """Run mini-batch Adam; returns ``(params, loss_curve)``."""
    X, Y = _check_training_data(X, Y)
    n = X.shape[0]
    rng = np.random.default_rng(config.seed)
    params = init_params(X.shape[1], Y.shape[1], config.hidden_width, rng)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    batch = min(config.batch_size, n)
    curve = []
    best = np.inf
    stale = 0
    t = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            value, grads = loss_and_gradients(
                params, X[idx], Y[idx], config.l2_penalty, loss
            )
            total += value * len(idx)
            t += 1
            step = config.learning_rate * np.sqrt(1 - _BETA2**t) / (1 - _BETA1**t)
            for p, g, mp, vp in zip(params, grads, m, v):
                mp *= _BETA1
                mp += (1 - _BETA1) * g
                vp *= _BETA2
                vp += (1 - _BETA2) * (g * g)
                p -= step * mp / (np.sqrt(vp) + _ADAM_EPS)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, epoch_loss)
        curve.append(epoch_loss)
        if epoch_loss > best - config.tolerance:
            stale += 1
        else:
            stale = 0
        best = min(best, epoch_loss)
        if stale > config.n_iter_no_change:
            break
    return params, curve


def train_mlp(inputs, targets, config: MlpConfig = MlpConfig()) -> TrainedRegressor:
    params, curve = fit_network(inputs, targets, config, loss="squared")
    return TrainedRegressor(*params, loss_curve=tuple(curve), config=config)


def gradient_check(config: MlpConfig, inputs, targets, loss="squared", step=1e-6):
    """Largest relative gap between backprop and central finite differences.

    The network is freshly initialised from ``config.seed``. Relative error
    per coordinate is ``|a - f| / max(|a|, |f|, 1e-6)``.
    """
    X, Y = _check_training_data(inputs, targets)
    if X.shape[0] > 32:
        raise InvalidInputError("gradient probes are limited to 32 instances")
    rng = np.random.default_rng(config.seed)
    params = init_params(X.shape[1], Y.shape[1], config.hidden_width, rng)
    _, grads = loss_and_gradients(params, X, Y, config.l2_penalty, loss)
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = loss_and_gradients(params, X, Y, config.l2_penalty, loss)
            flat[i] = orig - step
            down, _ = loss_and_gradients(params, X, Y, config.l2_penalty, loss)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            denom = max(abs(gflat[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
