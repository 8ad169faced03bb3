"""Numeric backend selection.

Hot kernels in :mod:`helixguard._kernels` are compiled with numba unless the
environment variable ``HELIXGUARD_NUMBA`` is set to ``0`` (or numba is not
importable), in which case the same code runs as plain numpy/Python.  The
fallback is functionally identical but slow; it exists for debugging and for
machines without a working JIT toolchain.
"""

from __future__ import annotations

import os

_flag = os.environ.get("HELIXGUARD_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "off", "no")

if NUMBA_ENABLED:
    try:
        from numba import njit as _numba_njit
    except ImportError:  # pragma: no cover - numba is a hard dep, but be safe
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def njit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        if func is None:
            return _numba_njit(**kwargs)
        return _numba_njit(**kwargs)(func)

else:

    def njit(func=None, **kwargs):
        if func is None:
            return lambda f: f
        return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
