"""Build script for the optional compiled scan kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so the extension is marked optional: a failed compile must not
block installation.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "ivxlab._kernels._scan",
                ["src/ivxlab/_kernels/_scan.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
