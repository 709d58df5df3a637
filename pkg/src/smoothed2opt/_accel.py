"""Numba switch.

Set ``SMOOTHED2OPT_NUMBA=0`` to force the pure-numpy kernels, e.g. to debug
or to compare against the compiled path. The flag is read once at import.
"""
import os

_flag = os.environ.get("SMOOTHED2OPT_NUMBA", "1").strip().lower()

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False
    _njit = None

USE_NUMBA = HAVE_NUMBA and _flag not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    if len(args) == 1 and callable(args[0]):
        return _njit(**kwargs)(args[0])
    return _njit(*args, **kwargs)
