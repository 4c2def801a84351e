"""Optional numba acceleration.

Set ``SZEGOLAB_DISABLE_JIT=1`` to force the pure-numpy code paths (useful for
debugging and for checking that both paths agree).  When numba is missing the
fallback is selected automatically.
"""

import os

_disabled = os.environ.get("SZEGOLAB_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError("disabled via SZEGOLAB_DISABLE_JIT")
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with the env flag
    _numba_njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


def use_jit():
    return HAVE_NUMBA
