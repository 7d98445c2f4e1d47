"""Series generation, ingestion, normalisation, windowing and splitting."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    DegenerateSeriesError,
    IngestionError,
    InvalidParameterError,
    InvalidSplitError,
)

SOURCES = ("synthetic-mackey-glass", "synthetic-lorenz", "synthetic-sine", "csv")

MACKEY_GLASS_DEFAULTS = {"tau": 17.0, "beta": 0.2, "gamma": 0.1, "exponent": 10.0, "dt": 0.1}
LORENZ_DEFAULTS = {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0, "dt": 0.01, "sample_every": 5}


def _frozen(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    name: str
    values: np.ndarray
    source: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise InvalidParameterError(f"unknown source {self.source!r}")
        values = _frozen(self.values)
        if values.ndim != 1:
            raise InvalidParameterError("a series must be one-dimensional")
        if not np.isfinite(values).all():
            raise InvalidParameterError(f"series {self.name!r} contains non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    inputs: np.ndarray
    targets: np.ndarray
    w: int
    H: int
    origin_indices: np.ndarray

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise InvalidParameterError("inputs and targets must have equal row counts")
        if self.inputs.shape[1] != self.w or self.targets.shape[1] != self.H:
            raise InvalidParameterError("matrix widths disagree with (w, H)")
        for name in ("inputs", "targets", "origin_indices"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, rows) -> "WindowedDataset":
        return WindowedDataset(
            self.inputs[rows], self.targets[rows], self.w, self.H, self.origin_indices[rows]
        )


def _readonly(a):
    a = np.asarray(a)
    if a.flags.writeable:
        a = a.copy()
        a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    eval_fraction: float = 0.10
    gap_policy: str = "contiguous-tail-eval"

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise InvalidSplitError("train_fraction must lie in (0, 1]")
        if not 0 < self.eval_fraction < 1:
            raise InvalidSplitError("eval_fraction must lie in (0, 1)")
        if self.gap_policy != "contiguous-tail-eval":
            raise InvalidSplitError(f"unsupported gap policy {self.gap_policy!r}")


def generate_mackey_glass(n, params=None, seed=0, history=None, burn_in=None) -> TimeSeries:
    """One sample per time unit of the Mackey-Glass delay equation.

    ``history`` is the constant value on ``[-tau, 0]``; when omitted it is
    drawn uniformly from ``[0.5, 1.2)`` with ``seed``. ``burn_in`` is in
    time units and defaults to ``10 * tau``.
    """
    p = {**MACKEY_GLASS_DEFAULTS, **(params or {})}
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if p["dt"] <= 0 or p["tau"] <= 0:
        raise InvalidParameterError("dt and tau must be positive")
    per_unit = round(1.0 / p["dt"])
    delay = round(p["tau"] / p["dt"])
    if abs(per_unit * p["dt"] - 1.0) > 1e-9 or abs(delay * p["dt"] - p["tau"]) > 1e-9:
        raise InvalidParameterError("1/dt and tau/dt must be whole numbers")
    if history is None:
        history = float(np.random.default_rng(seed).uniform(0.5, 1.2))
    burn = 10 * p["tau"] if burn_in is None else burn_in
    if burn < 0:
        raise InvalidParameterError("burn_in must be non-negative")
    burn_units = math.ceil(burn)
    n_steps = (burn_units + n - 1) * per_unit
    grid = kernels.mackey_glass(
        float(history), n_steps, delay, float(p["dt"]),
        float(p["beta"]), float(p["gamma"]), float(p["exponent"]),
    )
    values = grid[burn_units * per_unit::per_unit][:n]
    meta = {"params": p, "seed": seed, "history": history, "burn_in": burn_units}
    return TimeSeries("mackey-glass", values, "synthetic-mackey-glass", meta)


def generate_lorenz(n, params=None, seed=0, initial=None, burn_in=10.0) -> TimeSeries:
    """x-coordinate of the Lorenz system, RK4 with ``sample_every`` steps per sample.

    Without ``initial`` the start is (1, 1, 1) plus seeded N(0, 1) jitter.
    ``burn_in`` is in time units.
    """
    p = {**LORENZ_DEFAULTS, **(params or {})}
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if p["dt"] <= 0 or int(p["sample_every"]) < 1:
        raise InvalidParameterError("dt must be positive and sample_every >= 1")
    if p["sigma"] <= 0 or p["beta"] <= 0 or p["rho"] < 0:
        raise InvalidParameterError("sigma, beta must be positive and rho non-negative")
    if burn_in < 0:
        raise InvalidParameterError("burn_in must be non-negative")
    if initial is None:
        initial = (1.0, 1.0, 1.0) + np.random.default_rng(seed).normal(size=3)
    every = int(p["sample_every"])
    burn_steps = int(round(burn_in / p["dt"]))
    n_steps = burn_steps + (n - 1) * every
    traj = kernels.lorenz(
        *map(float, initial), n_steps, float(p["dt"]),
        float(p["sigma"]), float(p["rho"]), float(p["beta"]),
    )
    values = traj[burn_steps::every, 0][:n]
    meta = {"params": p, "seed": seed, "initial": [float(v) for v in initial], "burn_in": burn_in}
    return TimeSeries("lorenz", values, "synthetic-lorenz", meta)


def generate_noisy_sine(n, period=50.0, noise_fraction=0.05, seed=0) -> TimeSeries:
    if n < 1 or period <= 0 or noise_fraction < 0:
        raise InvalidParameterError("need n >= 1, period > 0, noise_fraction >= 0")
    t = np.arange(n)
    clean = np.sin(2 * np.pi * t / period)
    noise = np.random.default_rng(seed).normal(0.0, noise_fraction, n) if noise_fraction else 0.0
    meta = {"period": period, "noise_fraction": noise_fraction, "seed": seed}
    return TimeSeries("sine", clean + noise, "synthetic-sine", meta)


def load_csv(path, column=0) -> TimeSeries:
    """Read one numeric column. ``column`` is a header name or 0-based index.

    A header row is assumed when the first row's selected cell is not
    numeric. Reported row numbers are 1-based file lines.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise IngestionError(f"{path} is empty")

    first_line, first = rows[0]
    header = None
    if isinstance(column, str) and not column.lstrip("-").isdigit():
        header = [c.strip() for c in first]
        if column not in header:
            raise IngestionError(f"{path}: column {column!r} not found in header {header}")
        col = header.index(column)
        rows = rows[1:]
    else:
        col = int(column)
        try:
            float(first[col])
        except (ValueError, IndexError):
            header = [c.strip() for c in first]
            rows = rows[1:]

    values = []
    for line, row in rows:
        if col >= len(row):
            raise IngestionError(f"{path}: row {line} has no column {column!r}")
        cell = row[col].strip()
        try:
            v = float(cell)
        except ValueError:
            raise IngestionError(f"{path}: non-numeric value {cell!r} at row {line}") from None
        if not math.isfinite(v):
            raise IngestionError(f"{path}: non-finite value {cell!r} at row {line}")
        values.append(v)
    if not values:
        raise IngestionError(f"{path}: no data rows")
    label = header[col] if header else str(col)
    return TimeSeries(f"{path.stem}:{label}", values, "csv", {"path": str(path), "column": column})


def normalize(ts: TimeSeries, fit_range=None) -> TimeSeries:
    """Min-max scale onto [0, 1].

    ``fit_range`` (a slice of positions) restricts where the min/max come
    from, e.g. the training portion only; values outside it may then leave
    [0, 1].
    """
    ref = ts.values if fit_range is None else ts.values[fit_range]
    lo, hi = float(np.min(ref)), float(np.max(ref))
    if not hi > lo:
        raise DegenerateSeriesError(f"series {ts.name!r} has no spread to normalise")
    scaled = (ts.values - lo) / (hi - lo)
    meta = {**ts.meta, "normalized": {"min": lo, "max": hi}}
    return TimeSeries(ts.name, scaled, ts.source, meta)


def make_windows(ts, w, H) -> WindowedDataset:
    values = ts.values if isinstance(ts, TimeSeries) else np.asarray(ts, dtype=np.float64)
    if w < 1 or H < 1:
        raise InvalidParameterError("w and H must be positive")
    T = len(values)
    if T < w + H:
        raise InvalidParameterError(
            f"series of length {T} is too short: windowing needs at least w + H = {w + H}"
        )
    view = np.lib.stride_tricks.sliding_window_view(values, w + H)
    return WindowedDataset(
        np.ascontiguousarray(view[:, :w]),
        np.ascontiguousarray(view[:, w:]),
        w,
        H,
        np.arange(T - w - H + 1),
    )


def _share(fraction, total):
    # guards against 0.29 * 100 == 28.999999999999996
    return int(math.floor(fraction * total + 1e-9))


def split(ds: WindowedDataset, spec: SplitSpec = SplitSpec()):
    """Chronological split: the last ``eval_fraction`` of instances is held out,
    training takes the first ``train_fraction`` of what remains."""
    n = len(ds)
    n_eval = _share(spec.eval_fraction, n)
    n_rest = n - n_eval
    n_train = _share(spec.train_fraction, n_rest)
    if n_eval < 1:
        raise InvalidSplitError(f"evaluation partition is empty for {n} instances")
    if n_train < 1:
        raise InvalidSplitError(f"training partition is empty for {n} instances")
    return ds.subset(slice(0, n_train)), ds.subset(slice(n_rest, n))
