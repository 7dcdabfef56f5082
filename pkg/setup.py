"""Build script: compiles the optional Cython hot-kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here downgrades to a pure-Python install
rather than aborting.
"""

import os

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    # -ffp-contract=off keeps the C kernels bit-identical to the numpy
    # fallback (no FMA contraction of a*b+c).
    args = ["-O3", "-ffp-contract=off"]
    link = []
    if os.environ.get("LOCALSGD_NO_OPENMP") != "1":
        args.append("-fopenmp")
        link.append("-fopenmp")
    ext = Extension(
        "localsgd._kernels",
        ["src/localsgd/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=args,
        extra_link_args=link,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
