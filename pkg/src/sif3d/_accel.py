"""Numba switch.

Set ``SIF3D_DISABLE_NUMBA=1`` before import to route every kernel through
its pure-numpy implementation. Without numba installed the numpy path is
used automatically.
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_disabled = os.environ.get("SIF3D_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

USE_NUMBA = HAS_NUMBA and not _disabled


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it as-is."""
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def set_threads(n):
    if HAS_NUMBA and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def backend():
    return "numba" if USE_NUMBA else "numpy"
