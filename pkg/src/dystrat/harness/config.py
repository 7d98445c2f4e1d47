"""Experiment configuration: dataclasses plus YAML/dict round-tripping."""
from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import InvalidParameterError
from ..evaluation import METRICS
from ..mlp import MlpConfig
from ..selector import ClassifierConfig

DATASET_KINDS = ("mackey-glass", "lorenz", "sine", "csv")
POOL_MODES = (None, "exclude-recursive", "direct-only")


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "mackey-glass"
    n: int = 10000
    params: dict = field(default_factory=dict)
    path: str | None = None
    column: str | int = 0
    normalize: str = "global"

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise InvalidParameterError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "csv" and not self.path:
            raise InvalidParameterError("csv datasets need a path")
        if self.normalize not in ("global", "train", "none"):
            raise InvalidParameterError(f"unknown normalisation {self.normalize!r}")


@dataclass(frozen=True)
class SubsetCurveConfig:
    sizes: tuple = (2, 4, 8, 13)
    samples_per_size: int = 30
    classifier: str = "ds_tsf"
    restricted_pool: str | None = "exclude-recursive"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.restricted_pool not in POOL_MODES:
            raise InvalidParameterError(f"unknown pool restriction {self.restricted_pool!r}")
        if self.samples_per_size < 1:
            raise InvalidParameterError("samples_per_size must be >= 1")


def default_classifiers():
    return (
        ClassifierConfig(kind="linear"),
        ClassifierConfig(kind="mlp"),
        ClassifierConfig(kind="knn"),
        ClassifierConfig(kind="ts-forest"),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    horizon: int = 20
    window_multiplier: int = 2
    train_fraction: float = 0.75
    eval_fraction: float = 0.10
    mlp: MlpConfig = field(default_factory=MlpConfig)
    classifiers: tuple = field(default_factory=default_classifiers)
    metrics: tuple = METRICS
    repeats: int = 5
    base_seed: int = 0
    strategy_filter: tuple | None = None
    ablate_gstar: bool = False
    gstar_split: str = "eval"
    selector_holdout_fraction: float = 0.0
    subset_curve: SubsetCurveConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.strategy_filter is not None:
            object.__setattr__(self, "strategy_filter", tuple(self.strategy_filter))
        if self.repeats < 1:
            raise InvalidParameterError("repeats must be >= 1")
        if self.horizon < 1 or self.window < 1:
            raise InvalidParameterError("horizon and window must be >= 1")
        if "mse" not in self.metrics:
            raise InvalidParameterError("metrics must include mse")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise InvalidParameterError(f"unknown metrics {sorted(unknown)}")
        if self.gstar_split not in ("eval", "train"):
            raise InvalidParameterError("gstar_split must be 'eval' or 'train'")
        if not 0 <= self.selector_holdout_fraction < 1:
            raise InvalidParameterError("selector_holdout_fraction must lie in [0, 1)")
        names = [c.name for c in self.classifiers]
        if len(set(names)) != len(names):
            raise InvalidParameterError(f"duplicate classifier names {names}")

    @property
    def window(self):
        return self.window_multiplier * self.horizon

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - known
        if extra:
            raise InvalidParameterError(f"unknown config keys: {sorted(extra)}")
        if "dataset" in raw:
            raw["dataset"] = DatasetConfig(**raw["dataset"])
        if "mlp" in raw:
            raw["mlp"] = MlpConfig(**raw["mlp"])
        if "classifiers" in raw:
            raw["classifiers"] = tuple(ClassifierConfig(**c) for c in raw["classifiers"])
        if raw.get("subset_curve") is not None:
            raw["subset_curve"] = SubsetCurveConfig(**raw["subset_curve"])
        return cls(**raw)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:10]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _set_dotted(raw, key, value):
    parts = key.split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def load_config(path) -> ExperimentConfig:
    raw = yaml.safe_load(Path(path).read_text()) or {}
    raw.pop("grid", None)
    return ExperimentConfig.from_dict(raw)


def load_grid(path):
    """Expand a ``grid:`` section (dotted keys to value lists) into configs."""
    raw = yaml.safe_load(Path(path).read_text()) or {}
    grid = raw.pop("grid", None) or {}
    keys = list(grid)
    configs = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cell = json.loads(json.dumps(raw))
        for k, v in zip(keys, combo):
            _set_dotted(cell, k, v)
        suffix = ",".join(f"{k}={v}" for k, v in zip(keys, combo))
        cell["name"] = f"{raw.get('name', 'experiment')}[{suffix}]" if suffix else raw.get("name", "experiment")
        configs.append(ExperimentConfig.from_dict(cell))
    return configs


def dump_config(cfg: ExperimentConfig, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
