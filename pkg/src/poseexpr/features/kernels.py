"""Backend dispatch for the hot kernels.

``tplbp_code_map`` and ``sift_raw_descriptor`` come either from the numba-
compiled loop kernels or from the vectorized numpy fallback, depending on
POSEEXPR_BACKEND (see poseexpr.backend).
"""

from ..backend import HAS_NUMBA

if HAS_NUMBA:
    from numba import njit

    from . import _kern_loops as _loops

    # jit the helper in place so the outer kernels find the compiled version
    # through their module globals when they compile lazily
    _loops.bilinear = njit(cache=True)(_loops.bilinear)
    tplbp_code_map = njit(cache=True)(_loops.tplbp_code_map)
    sift_raw_descriptor = njit(cache=True)(_loops.sift_raw_descriptor)
else:
    from ._kern_numpy import sift_raw_descriptor, tplbp_code_map  # noqa: F401

__all__ = ["BACKEND", "tplbp_code_map", "sift_raw_descriptor"]
