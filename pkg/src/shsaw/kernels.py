"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``SHSAW_PURE_PYTHON=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
riccati_rk4 = _kernels_py.riccati_rk4

if os.environ.get("SHSAW_PURE_PYTHON", "") in ("", "0"):
    try:
        from ._kernels import riccati_rk4  # noqa: F811
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        BACKEND = "cython"

__all__ = ["BACKEND", "riccati_rk4"]
