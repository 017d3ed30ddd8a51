"""JIT switch for the numeric kernels.

Set ``MCC_PILOT_NUMBA=0`` before import to run every kernel on its pure
numpy / interpreted path. Numba is also skipped silently when it is not
installed.
"""

import os

_FLAG = os.environ.get("MCC_PILOT_NUMBA", "1").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when JIT is enabled, otherwise an identity decorator."""
    if USE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorator(func):
        return func

    return decorator


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
