"""Numba switch.

Set ``PROTPLACE_DISABLE_NUMBA=1`` to run every kernel on the pure
Python/numpy path. The flag is read once, at import time.
"""

import logging
import os

logger = logging.getLogger(__name__)

DISABLED = os.environ.get("PROTPLACE_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError("disabled by PROTPLACE_DISABLE_NUMBA")
    import numba

    USE_NUMBA = True
except ImportError as exc:  # pragma: no cover - depends on environment
    numba = None
    USE_NUMBA = False
    logger.debug("numba unavailable, using the numpy fallback: %s", exc)


def njit(pyfunc=None, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(func):
        if USE_NUMBA:
            return numba.njit(**kwargs)(func)
        return func

    return wrap if pyfunc is None else wrap(pyfunc)


def python_impl(func):
    """Underlying Python function of a (possibly) jitted kernel."""
    return getattr(func, "py_func", func)
