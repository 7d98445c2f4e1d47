"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``DYSTRAT_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("DYSTRAT_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

mackey_glass = _impl.mackey_glass
lorenz = _impl.lorenz
interval_features = _impl.interval_features
build_tree = _impl.build_tree
apply_tree = _impl.apply_tree

__all__ = [
    "BACKEND",
    "mackey_glass",
    "lorenz",
    "interval_features",
    "build_tree",
    "apply_tree",
]
