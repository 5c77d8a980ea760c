"""Optional numba acceleration.

Hot kernels are written once in a loop style that numba compiles and that
also runs unchanged (slowly) as plain Python. Each kernel module pairs the
compiled loop with a vectorised numpy implementation; which one is used is
decided at import time:

* ``G2FIT_DISABLE_NUMBA=1`` forces the numpy path.
* If numba cannot be imported the numpy path is used with a warning.
"""

import os
from warnings import warn

_DISABLED = os.environ.get("G2FIT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by G2FIT_DISABLE_NUMBA")
    import numba as _nb
except ImportError as exc:  # pragma: no cover - exercised via subprocess test
    if not _DISABLED:
        warn(f"numba unavailable ({exc}); falling back to numpy kernels")
    _nb = None

USE_NUMBA = _nb is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _nb is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def identity(fn):
            return fn

        return identity
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return _nb.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
