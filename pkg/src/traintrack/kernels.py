"""Pick the compiled kernels when available, else the pure-Python ones.

Set ``TRAINTRACK_PURE=1`` to force the fallback (used by the benchmark and
by the test that checks both backends agree).
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("TRAINTRACK_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

free_reduce = _impl.free_reduce
substitute = _impl.substitute
cyclic_reduce = _impl.cyclic_reduce
common_prefix = _impl.common_prefix

__all__ = ["BACKEND", "free_reduce", "substitute", "cyclic_reduce", "common_prefix"]
