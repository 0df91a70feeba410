"""Kernel backend selection: numba-jitted or pure Python/NumPy.

The hot kernels (HNSW graph build/search, the rank-cost reduction) are
written in njit-compatible style so the same function bodies run under
both backends.  Selection:

  GPMAL_BACKEND=numba   require numba (warn + fall back if missing)
  GPMAL_BACKEND=numpy   force the pure Python/NumPy fallback
  unset / auto          numba when importable, fallback otherwise

``benchmarks/bench_backends.py`` times both paths on the same workload.
"""

import os
import warnings

_requested = os.environ.get("GPMAL_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    warnings.warn(f"unknown GPMAL_BACKEND={_requested!r}, using auto")
    _requested = "auto"

_njit = None
if _requested in ("auto", "numba"):
    try:
        from numba import njit as _njit
    except ImportError:
        if _requested == "numba":
            warnings.warn("GPMAL_BACKEND=numba but numba is not importable; "
                          "using the numpy fallback")
        _njit = None

USE_NUMBA = _njit is not None


def active_backend() -> str:
    """Name of the kernel backend in use: 'numba' or 'numpy'."""
    return "numba" if USE_NUMBA else "numpy"


def jit_kernel(func):
    """Compile a kernel with numba when enabled, else return it unchanged.

    No fastmath: both backends must produce bit-identical IEEE results.
    """
    if USE_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func
