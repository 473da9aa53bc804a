"""Backend selection for the hot loops.

The compiled ``_core`` extension is used when it imports; otherwise the pure
Python twin in ``_pycore`` takes over. Setting ``TERRASEG_BACKEND=python``
forces the fallback, ``TERRASEG_BACKEND=compiled`` makes a missing extension
an import error.
"""
from __future__ import annotations

import logging
import os

from . import _pycore
from ._pycore import BLOCK

log = logging.getLogger(__name__)

_requested = os.environ.get("TERRASEG_BACKEND", "auto").lower()
if _requested not in ("auto", "compiled", "python"):
    raise ImportError(f"TERRASEG_BACKEND must be auto, compiled or python, got {_requested!r}")

_impl = _pycore
BACKEND = "python"
if _requested != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        log.warning("compiled core unavailable, using the pure Python fallback")

box_sum = _impl.box_sum
welford_cells = _impl.welford_cells
occlusion_mask = _impl.occlusion_mask
window_sums = _impl.window_sums
spiral_interpolate = _impl.spiral_interpolate


def backends() -> dict:
    """Map backend name to kernel module for every importable backend."""
    found = {"python": _pycore}
    try:
        from . import _core

        found["compiled"] = _core
    except ImportError:
        pass
    return found
