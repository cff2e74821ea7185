"""Kernel backend selection.

Prefers the compiled extension; falls back to pure numpy. Override with
ADVCURVES_KERNELS=compiled|python (requesting a missing compiled backend
is an error so benchmarks cannot silently compare python to itself).
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels  # type: ignore[attr-defined]
except ImportError:
    _kernels = None

_requested = os.environ.get("ADVCURVES_KERNELS", "").strip().lower()
if _requested == "python":
    _impl = _kernels_py
elif _requested == "compiled":
    if _kernels is None:
        raise ImportError("ADVCURVES_KERNELS=compiled but the extension is not built")
    _impl = _kernels
elif _requested == "":
    _impl = _kernels if _kernels is not None else _kernels_py
else:
    raise ImportError(f"unknown ADVCURVES_KERNELS value: {_requested!r}")

BACKEND: str = "compiled" if _impl is _kernels else "python"

stroke_mask = _impl.stroke_mask
warp_bilinear = _impl.warp_bilinear
label_components = _impl.label_components

__all__ = ["BACKEND", "stroke_mask", "warp_bilinear", "label_components"]
