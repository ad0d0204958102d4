"""Backend selection for the hot solver kernels.

Set ``CSVM_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when numba
is importable.
"""
import os

_FLAG = os.environ.get("CSVM_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError("numba disabled by CSVM_DISABLE_NUMBA")
    from numba import njit

    NUMBA_OK = True
except ImportError:
    NUMBA_OK = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(f):
            return f

        return decorator


BACKEND = "numba" if NUMBA_OK else "numpy"

__all__ = ["njit", "NUMBA_OK", "BACKEND"]
