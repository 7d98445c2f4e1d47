"""Multi-step forecasting strategies built from one-hidden-layer regressors.

Supported kinds:

* ``MO``      one model maps the window to all H steps.
* ``RECMO``   one model predicts ``sigma`` steps; applied recursively on a
              rolling buffer whose last ``w`` values form the next input.
* ``DIRMO``   ``H / sigma`` models, model ``i`` predicts steps
              ``[i*sigma, (i+1)*sigma)`` directly from the window.
* ``DIRREC``  ``H`` one-step models; model ``i`` sees the window plus the
              outputs of models ``0..i-1``.
* ``RECTIFY`` a one-step recursive base plus a multi-output model fit on
              the base's training residuals.

Forecasting is batched: every public entry point goes through
:func:`forecast_batch`, so a single forecast is bit-identical to the same
row of a batched one.
"""
from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    InvalidInputError,
    InvalidParameterError,
    InvalidSpecError,
    StrategyTrainingError,
)
from .mlp import MlpConfig, TrainedRegressor, train_mlp


class Kind(str, Enum):
    MO = "MO"
    RECMO = "RECMO"
    DIRMO = "DIRMO"
    DIRREC = "DIRREC"
    RECTIFY = "RECTIFY"


@dataclass(frozen=True)
class StrategySpec:
    kind: Kind
    sigma: int | None = None
    display_name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in (Kind.RECMO, Kind.DIRMO) and (self.sigma is None or self.sigma < 1):
            raise InvalidSpecError(f"{self.kind.value} needs a positive sigma")
        if not self.display_name:
            object.__setattr__(self, "display_name", _default_name(self.kind, self.sigma))

    def validate(self, H):
        if self.kind in (Kind.RECMO, Kind.DIRMO):
            if self.sigma > H or H % self.sigma:
                raise InvalidSpecError(
                    f"{self.display_name}: sigma={self.sigma} does not divide H={H}"
                )
        elif self.kind is Kind.MO and self.sigma not in (None, H):
            raise InvalidSpecError(f"MO must have sigma == H ({H})")

    def canonical_name(self, H):
        """Identity used for seeding; RECMO/DIRMO at sigma == H collapse to ``mo``."""
        if self.kind is Kind.MO or (self.kind in (Kind.RECMO, Kind.DIRMO) and self.sigma == H):
            return "mo"
        return _default_name(self.kind, self.sigma)


def _default_name(kind, sigma):
    return {
        Kind.MO: "mo",
        Kind.RECMO: f"r{sigma}",
        Kind.DIRMO: f"d{sigma}",
        Kind.DIRREC: "dirrec",
        Kind.RECTIFY: "rectify",
    }[Kind(kind)]


def spec_from_name(name: str) -> StrategySpec:
    name = name.strip().lower()
    if name == "mo":
        return StrategySpec(Kind.MO)
    if name in ("rectify", "rc"):
        return StrategySpec(Kind.RECTIFY)
    if name == "dirrec":
        return StrategySpec(Kind.DIRREC)
    if name[:1] in ("r", "d") and name[1:].isdigit():
        return StrategySpec(Kind.RECMO if name[0] == "r" else Kind.DIRMO, int(name[1:]))
    raise InvalidSpecError(f"unrecognised strategy name {name!r}")


def proper_divisors(H):
    return [s for s in range(1, H) if H % s == 0]


def enumerate_strategies(H):
    """``mo, rectify, d1, r1, dirrec, d2, r2, ...`` for every proper divisor of H."""
    if H < 1:
        raise InvalidParameterError("H must be >= 1")
    specs = [StrategySpec(Kind.MO), StrategySpec(Kind.RECTIFY)]
    for sigma in proper_divisors(H):
        specs += [StrategySpec(Kind.DIRMO, sigma), StrategySpec(Kind.RECMO, sigma)]
        if sigma == 1:
            specs.append(StrategySpec(Kind.DIRREC))
    if H == 1:
        specs.append(StrategySpec(Kind.DIRREC))
    return specs


def model_seed(base_seed, name, index):
    """Seed for sub-model ``index`` of strategy ``name``; order independent."""
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFF, zlib.crc32(name.encode()), index])
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class TrainedStrategy:
    spec: StrategySpec
    w: int
    H: int
    models: tuple

    @property
    def name(self):
        return self.spec.display_name

    def forecast(self, x):
        return forecast(self, x)

    def forecast_batch(self, X):
        return forecast_batch(self, X)


def _rolling(model, X, sigma, w, H):
    buffer = X
    chunks = []
    produced = 0
    while produced < H:
        step = np.asarray(model.predict(buffer[:, -w:])).reshape(X.shape[0], -1)[:, :sigma]
        chunks.append(step)
        buffer = np.concatenate([buffer, step], axis=1)
        produced += step.shape[1]
    return np.concatenate(chunks, axis=1)[:, :H]


def _dirrec(models, X):
    features = X
    outs = []
    for model in models:
        step = np.asarray(model.predict(features)).reshape(X.shape[0], -1)
        outs.append(step)
        features = np.concatenate([features, step], axis=1)
    return np.concatenate(outs, axis=1)


def forecast_batch(strategy: TrainedStrategy, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != strategy.w:
        raise InvalidInputError(f"expected inputs of width {strategy.w}, got shape {X.shape}")
    kind, H, w = strategy.spec.kind, strategy.H, strategy.w
    models = strategy.models
    if kind is Kind.MO:
        out = np.asarray(models[0].predict(X)).reshape(X.shape[0], -1)
    elif kind is Kind.RECMO:
        out = _rolling(models[0], X, strategy.spec.sigma, w, H)
    elif kind is Kind.DIRMO:
        out = np.concatenate(
            [np.asarray(m.predict(X)).reshape(X.shape[0], -1) for m in models], axis=1
        )
    elif kind is Kind.DIRREC:
        out = _dirrec(models, X)
    else:
        base = _rolling(models[0], X, 1, w, H)
        out = base + np.asarray(models[1].predict(X)).reshape(X.shape[0], -1)
    if out.shape[1] != H:
        raise InvalidInputError(f"{strategy.name} produced {out.shape[1]} steps, expected {H}")
    return out


def forecast(strategy: TrainedStrategy, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != strategy.w:
        raise InvalidInputError(f"expected a window of length {strategy.w}")
    return forecast_batch(strategy, x[None, :])[0]


def rectify_parts(strategy: TrainedStrategy, X):
    """(recursive base forecast, correction) for a RECTIFY strategy."""
    X = np.asarray(X, dtype=np.float64)
    base = _rolling(strategy.models[0], X, 1, strategy.w, strategy.H)
    return base, np.asarray(strategy.models[1].predict(X)).reshape(X.shape[0], -1)


def train_strategy(spec: StrategySpec, train, cfg: MlpConfig = MlpConfig(), model_order=None):
    """Fit every sub-model of ``spec`` on a windowed training set.

    ``model_order`` permutes the order in which independent DIRMO sub-models
    are fitted; it has no effect on the result.
    """
    X, Y, w, H = train.inputs, train.targets, train.w, train.H
    if len(train) < 1:
        raise InvalidInputError("training set is empty")
    spec.validate(H)
    key = spec.canonical_name(H)

    def fit(index, inputs, targets):
        return train_mlp(inputs, targets, cfg.replace(seed=model_seed(cfg.seed, key, index)))

    kind = spec.kind
    if key == "mo":
        models = (fit(0, X, Y),)
    elif kind is Kind.RECMO:
        models = (fit(0, X, Y[:, : spec.sigma]),)
    elif kind is Kind.DIRMO:
        sigma = spec.sigma
        m = H // sigma
        order = range(m) if model_order is None else model_order
        fitted = {i: fit(i, X, Y[:, i * sigma:(i + 1) * sigma]) for i in order}
        models = tuple(fitted[i] for i in range(m))
    elif kind is Kind.DIRREC:
        fitted = []
        features = X
        for i in range(H):
            model = fit(i, features, Y[:, i:i + 1])
            fitted.append(model)
            features = np.concatenate([features, model.predict(features).reshape(-1, 1)], axis=1)
        models = tuple(fitted)
    elif kind is Kind.RECTIFY:
        base = fit(0, X, Y[:, :1])
        residual = Y - _rolling(base, X, 1, w, H)
        models = (base, fit(1, X, residual))
    else:  # pragma: no cover
        raise InvalidSpecError(f"unknown kind {kind}")
    return TrainedStrategy(spec, w, H, models)


@dataclass(frozen=True, eq=False)
class StrategySet:
    strategies: tuple
    H: int
    w: int
    training_fingerprint: str

    def __post_init__(self):
        names = [s.name for s in self.strategies]
        if len(set(names)) != len(names):
            raise InvalidSpecError(f"duplicate strategy names: {names}")
        for s in self.strategies:
            if (s.w, s.H) != (self.w, self.H):
                raise InvalidSpecError(f"{s.name} has (w, H)=({s.w}, {s.H})")

    def __len__(self):
        return len(self.strategies)

    def __getitem__(self, i):
        return self.strategies[i]

    def __iter__(self):
        return iter(self.strategies)

    @property
    def names(self):
        return [s.name for s in self.strategies]

    def subset(self, indices):
        chosen = tuple(self.strategies[i] for i in indices)
        return StrategySet(chosen, self.H, self.w, self.training_fingerprint)

    def forecast_all(self, X):
        """Array of shape (n_strategies, n, H)."""
        return np.stack([forecast_batch(s, X) for s in self.strategies])

    def save(self, path):
        arrays = {}
        entries = []
        for i, s in enumerate(self.strategies):
            entries.append({
                "kind": s.spec.kind.value,
                "sigma": s.spec.sigma,
                "display_name": s.name,
                "n_models": len(s.models),
                "configs": [asdict(m.config) for m in s.models],
            })
            for j, m in enumerate(s.models):
                arrays.update(m.to_arrays(prefix=f"s{i}_m{j}_"))
        header = {
            "format": "dystrat.strategy-set/1",
            "H": self.H,
            "w": self.w,
            "fingerprint": self.training_fingerprint,
            "strategies": entries,
        }
        np.savez(Path(path), header=np.array(json.dumps(header)), **arrays)

    @classmethod
    def load(cls, path):
        with np.load(Path(path)) as z:
            header = json.loads(str(z["header"]))
            strategies = []
            for i, e in enumerate(header["strategies"]):
                spec = StrategySpec(Kind(e["kind"]), e["sigma"], e["display_name"])
                models = tuple(
                    TrainedRegressor.from_arrays(z, MlpConfig(**c), prefix=f"s{i}_m{j}_")
                    for j, c in enumerate(e["configs"])
                )
                strategies.append(TrainedStrategy(spec, header["w"], header["H"], models))
        return cls(tuple(strategies), header["H"], header["w"], header["fingerprint"])


def fingerprint(specs, train, cfg: MlpConfig):
    h = hashlib.sha256()
    h.update(json.dumps([s.display_name for s in specs]).encode())
    h.update(json.dumps(asdict(cfg), sort_keys=True).encode())
    h.update(np.ascontiguousarray(train.inputs).tobytes())
    h.update(np.ascontiguousarray(train.targets).tobytes())
    return f"{cfg.seed}-{h.hexdigest()[:16]}"


def train_all(specs, train, cfg: MlpConfig = MlpConfig()) -> StrategySet:
    specs = list(specs)
    if not specs:
        raise InvalidParameterError("need at least one strategy spec")
    names = [s.display_name for s in specs]
    if len(set(names)) != len(names):
        raise InvalidSpecError(f"duplicate strategy names: {names}")
    trained = []
    for spec in specs:
        try:
            trained.append(train_strategy(spec, train, cfg))
        except Exception as exc:
            raise StrategyTrainingError(spec.display_name, exc) from exc
    return StrategySet(tuple(trained), train.H, train.w, fingerprint(specs, train, cfg))
