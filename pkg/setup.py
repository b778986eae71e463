"""Build script for the optional compiled kernel backend.

The extension is a speed path only; if it fails to build, the package
falls back to the numpy implementation in fmax._kernels.pure.
-ffp-contract=off keeps the compiler from fusing multiply-adds, so the
compiled kernels produce bit-identical results to the fallback.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "fmax._kernels._speedups",
        ["src/fmax/_kernels/_speedups.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
