import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dystrat import _kernels_py as py
from dystrat import kernels

compiled = pytest.importorskip("dystrat._kernels", reason="compiled extension not built")


def brute_tree(X, y, n_classes, rows=None):
    """Recursive gini tree; returns a function mapping a row to leaf counts."""
    rows = np.arange(len(y)) if rows is None else rows
    counts = np.bincount(y[rows], minlength=n_classes).astype(float)
    if np.count_nonzero(counts) <= 1 or len(rows) < 2:
        return lambda x: counts
    best = None
    for f in range(X.shape[1]):
        vals = np.unique(X[rows, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            left = rows[X[rows, f] <= lo]
            right = rows[X[rows, f] > lo]
            cl = np.bincount(y[left], minlength=n_classes)
            cr = np.bincount(y[right], minlength=n_classes)
            score = np.sum(cl * cl) / len(left) + np.sum(cr * cr) / len(right)
            if best is None or score > best[0]:
                thr = (lo + hi) / 2.0
                best = (score, f, lo if thr == hi else thr, left, right)
    if best is None:
        return lambda x: counts
    _, f, thr, left, right = best
    lt = brute_tree(X, y, n_classes, left)
    rt = brute_tree(X, y, n_classes, right)
    return lambda x: lt(x) if x[f] <= thr else rt(x)


class TestParity:
    def test_backend_flag(self):
        assert kernels.BACKEND in ("compiled", "python")

    def test_mackey_glass(self):
        args = (0.87, 4000, 170, 0.1, 0.2, 0.1, 10.0)
        assert py.mackey_glass(*args).tobytes() == compiled.mackey_glass(*args).tobytes()
        short = (0.6, 50, 1, 0.1, 0.2, 0.1, 10.0)
        assert py.mackey_glass(*short).tobytes() == compiled.mackey_glass(*short).tobytes()

    def test_lorenz(self):
        args = (1.2, 0.4, 3.0, 3000, 0.01, 10.0, 28.0, 8.0 / 3.0)
        assert py.lorenz(*args).tobytes() == compiled.lorenz(*args).tobytes()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(3, 30), st.integers(1, 6))
    def test_interval_features(self, seed, w, m):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(17, w))
        starts = rng.integers(0, w - 2, m)
        ends = np.minimum(starts + rng.integers(3, w + 1, m), w)
        a = py.interval_features(X, starts, ends)
        b = compiled.interval_features(X, starts, ends)
        assert a.tobytes() == b.tobytes()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 5), st.sampled_from([-1, 0, 2, 5]))
    def test_tree(self, seed, n_classes, depth):
        rng = np.random.default_rng(seed)
        X = np.round(rng.normal(size=(60, 4)), 1)
        y = rng.integers(0, n_classes, 60)
        a = py.build_tree(X, y, n_classes, depth, 1)
        b = compiled.build_tree(X, y, n_classes, depth, 1)
        for u, v in zip(a, b):
            assert u.tobytes() == v.tobytes()
        probe = np.round(rng.normal(size=(40, 4)), 2)
        assert np.array_equal(py.apply_tree(probe, *a[:4]), compiled.apply_tree(probe, *b[:4]))

    def test_read_only_inputs(self):
        X = np.random.default_rng(0).normal(size=(10, 6))
        X.setflags(write=False)
        compiled.interval_features(X, np.array([0]), np.array([6]))
        compiled.build_tree(X, np.arange(10) % 2, 2, -1, 1)


class TestTreeOracle:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        X = np.round(rng.normal(size=(40, 3)), 1)
        y = rng.integers(0, 3, 40)
        oracle = brute_tree(X, y, 3)
        tree = kernels.build_tree(X, y, 3, -1, 1)
        probe = np.vstack([X, np.round(rng.normal(size=(30, 3)), 2)])
        leaves = kernels.apply_tree(probe, *tree[:4])
        for row, leaf in zip(probe, leaves):
            assert np.array_equal(tree[4][leaf], oracle(row))

    def test_pure_leaves_fit_training_data(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(50, 2))
        y = rng.integers(0, 4, 50)
        tree = kernels.build_tree(X, y, 4, -1, 1)
        leaves = kernels.apply_tree(X, *tree[:4])
        assert np.array_equal(np.argmax(tree[4][leaves], axis=1), y)

    def test_depth_zero_is_stump_root(self):
        X = np.arange(6.0)[:, None]
        y = np.array([0, 0, 0, 1, 1, 1])
        feature, threshold, left, right, value = kernels.build_tree(X, y, 2, 0, 1)
        assert len(feature) == 1 and value[0].tolist() == [3.0, 3.0]
        feature, threshold, *_ = kernels.build_tree(X, y, 2, 1, 1)
        assert feature[0] == 0 and threshold[0] == 2.5


def test_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = {**os.environ, "DYSTRAT_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "import dystrat; print(dystrat.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
