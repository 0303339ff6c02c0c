"""Optional numba acceleration with a pure-numpy fallback.

Hot kernels are written twice-compatible: a plain-Python/numpy definition
that numba can compile. ``jit`` applies ``numba.njit`` when acceleration
is enabled and returns the function unchanged otherwise, so the fallback
path is always importable and testable in-process.

Set ``TAILGAN_NO_NUMBA=1`` to force the fallback even when numba is
installed. The flag is read once at import time.
"""

import os

_DISABLED = os.environ.get("TAILGAN_NO_NUMBA", "").strip() not in ("", "0")

try:
    if _DISABLED:
        raise ImportError("numba disabled via TAILGAN_NO_NUMBA")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def jit(func=None, **kwargs):
    """Apply numba.njit when enabled; otherwise return ``func`` unchanged."""
    if func is None:
        return lambda f: jit(f, **kwargs)
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return _njit(**kwargs)(func)
    return func
