"""Kernel lane selection: numba-jitted hot loops with a pure-numpy fallback.

Set the environment variable RESLEARN_PURE_NUMPY=1 to skip numba entirely
(useful for debugging and for the lane-comparison benchmark). The fallback
runs the exact same Python source uncompiled.
"""

import os

PURE_NUMPY = os.environ.get("RESLEARN_PURE_NUMPY", "") not in ("", "0")

if not PURE_NUMPY:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        PURE_NUMPY = True

USING_NUMBA = not PURE_NUMPY


def maybe_njit(func):
    """Compile `func` with numba unless the pure-numpy lane is selected."""
    if USING_NUMBA:
        return _njit(cache=True)(func)
    return func
