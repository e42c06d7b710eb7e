"""Optional numba acceleration.

Set ``FSCIL_GACC_NO_NUMBA=1`` to force the pure-numpy code paths (useful for
debugging and for checking that both paths agree).
"""
import os

_DISABLED = os.environ.get("FSCIL_GACC_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    njit = None
    HAS_NUMBA = False


def jit(func):
    """``numba.njit(cache=True)`` when available, otherwise None."""
    if not HAS_NUMBA:
        return None
    return njit(cache=True)(func)
