"""Builds the optional compiled rasterizer kernel.

The package is fully functional without it: augforge._kernels falls back to
the pure-numpy implementation at import time. Set AUGFORGE_SKIP_EXT=1 to
force a pure-Python install.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("AUGFORGE_SKIP_EXT") == "1":
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "augforge._kernels._raster_c",
        sources=["src/augforge/_kernels/_raster_c.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off keeps FP results bit-identical to the numpy
        # fallback (no fused multiply-add).
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
