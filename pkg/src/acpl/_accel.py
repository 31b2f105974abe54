"""Numba detection and the env switch that forces the pure-numpy kernels.

Set ``ACPL_DISABLE_NUMBA=1`` (or any of ``true/yes/on``) before importing
:mod:`acpl` to run every kernel through its numpy fallback.
"""
import os

_FLAG = os.environ.get("ACPL_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED_BY_ENV = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


USE_NUMBA = HAS_NUMBA and not NUMBA_DISABLED_BY_ENV


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
