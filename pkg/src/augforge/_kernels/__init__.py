"""Kernel selection: compiled extension when available, numpy otherwise.

Set AUGFORGE_FORCE_FALLBACK=1 to ignore the compiled kernel (used by the
benchmark and the parity tests).
"""

import os

from augforge.geometry import _raster_py

try:
    from augforge._kernels import _raster_c
except ImportError:
    _raster_c = None

_forced = os.environ.get("AUGFORGE_FORCE_FALLBACK") == "1"

HAVE_COMPILED = _raster_c is not None
USING_COMPILED = HAVE_COMPILED and not _forced

if USING_COMPILED:
    rasterize_into = _raster_c.rasterize_into
else:
    rasterize_into = _raster_py.rasterize_into


def active_kernel() -> str:
    return "compiled" if USING_COMPILED else "numpy"
