"""Numba on/off switch.

Set ``ASAOPT_DISABLE_NUMBA=1`` before importing :mod:`asaopt` to run every
kernel through its pure-numpy twin. The choice is made once at import time.
"""
from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}


def _env_disabled() -> bool:
    return os.environ.get("ASAOPT_DISABLE_NUMBA", "").strip().lower() not in _FALSY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency, but stay importable
    _numba = None

USE_NUMBA: bool = _numba is not None and not _env_disabled()
BACKEND: str = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba when enabled; otherwise return it untouched."""
    if _numba is None:
        return func
    return _numba.njit(cache=True, nogil=True)(func)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
