"""Numba availability probe shared by the numeric kernels.

The hot loops (dynamic-programming alignment fills, the recursive Gaussian
noise generator) ship in two forms: numba ``@njit`` kernels and vectorized
numpy fallbacks.  Setting ``FAASTRACE_NO_NUMBA=1`` forces the numpy path
even when numba is importable; the same selection happens automatically
when numba is missing.
"""
from __future__ import annotations

import os

ENV_FLAG = "FAASTRACE_NO_NUMBA"


def _flag_set() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    if _flag_set():
        raise ImportError(f"numba disabled via {ENV_FLAG}")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        # Signature-compatible no-op so the loop kernels stay importable
        # without numba; dispatch never selects them in that case.
        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAS_NUMBA
