"""Select between numba-compiled kernels and the pure numpy fallback.

Set ``DPQUANTILES_DISABLE_NUMBA=1`` before import to force the numpy path.
The flag is read once, at import time.
"""

from __future__ import annotations

import functools
import os

_DISABLED = os.environ.get("DPQUANTILES_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by DPQUANTILES_DISABLE_NUMBA")
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(f):
            @functools.wraps(f)
            def wrapper(*a, **kw):
                return f(*a, **kw)

            return wrapper

        return decorator


BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"

__all__ = ["BACKEND", "NUMBA_AVAILABLE", "njit"]
