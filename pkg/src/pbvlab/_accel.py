"""Acceleration switch for the hot Monte Carlo kernels.

The ion-transport inner loops compile with numba when it is importable.
Setting ``PBVLAB_DISABLE_NUMBA=1`` in the environment selects the plain
Python/numpy path instead (same source, undecorated), which produces
bit-identical results -- useful for debugging and as a no-numba fallback.
The flag is read once at import time.
"""

import os

_flag = os.environ.get("PBVLAB_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _flag in ("1", "true", "yes", "on")

if not _DISABLED:
    try:
        from numba import njit as _njit
        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

ACCEL_MODE = "numba" if NUMBA_ENABLED else "python"


def kernel(func):
    """JIT-compile a hot kernel, or leave it as plain Python per the env flag."""
    if NUMBA_ENABLED:
        return _njit(cache=True, nogil=True)(func)
    return func
