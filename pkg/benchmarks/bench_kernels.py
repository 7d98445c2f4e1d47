"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from dystrat import _kernels_py as fallback

try:
    from dystrat import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


def cases():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6000, 40))
    starts = rng.integers(0, 30, 7)
    ends = np.minimum(starts + rng.integers(3, 40, 7), 40)
    y = rng.integers(0, 13, 2000)
    feats = fallback.interval_features(X[:2000], starts, ends)
    tree = fallback.build_tree(feats, y, 13)
    return {
        "mackey_glass (11k units)": lambda k: k.mackey_glass(0.9, 111_700, 170, 0.1, 0.2, 0.1, 10.0),
        "lorenz (60k steps)": lambda k: k.lorenz(1.0, 1.0, 1.0, 60_000, 0.01, 10.0, 28.0, 8 / 3),
        "interval_features (6000x40, 7 iv)": lambda k: k.interval_features(X, starts, ends),
        "build_tree (2000x21, 13 cls)": lambda k: k.build_tree(feats, y, 13),
        "apply_tree (2000 rows)": lambda k: k.apply_tree(feats, *tree[:4]),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    print(f"{'kernel':<36}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}")
    for name, fn in cases().items():
        t_py = min(timeit.repeat(lambda: fn(fallback), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:<36}{t_py:>12.4f}{'n/a':>14}{'':>10}")
            continue
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        print(f"{name:<36}{t_py:>12.4f}{t_c:>14.4f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
