"""Kernel backend selection.

The hot per-pixel loops (LBP/TPLBP code maps, SIFT descriptor accumulation)
exist twice: a numba @njit version and a vectorized pure-numpy version.
Set POSEEXPR_BACKEND=numpy to force the fallback; default is numba when it
imports, numpy otherwise.
"""

import os

_requested = os.environ.get("POSEEXPR_BACKEND", "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(f"POSEEXPR_BACKEND must be auto|numba|numpy, got {_requested!r}")

if _requested == "numpy":
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401
        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def njit(*args, **kwargs):
    """numba.njit when the numba backend is active, identity otherwise."""
    if HAS_NUMBA:
        from numba import njit as _njit
        return _njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f
