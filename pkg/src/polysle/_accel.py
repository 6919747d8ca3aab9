"""Optional numba acceleration.

Set ``POLYSLE_NO_NUMBA=1`` to run the pure-numpy fallback kernels instead of the
compiled ones. The choice is made once, at import time.
"""
import os

_DISABLED = os.environ.get("POLYSLE_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
