"""Build script for the optional compiled convolution kernels.

The package works without the extension: a NumPy fallback is selected at
import time, and benchmarks/bench_conv.py compares the two backends.
"""

import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = cythonize(
    [
        Extension(
            "echoform.kernels._conv_cy",
            ["src/echoform/kernels/_conv_cy.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ],
    language_level=3,
)

setup(ext_modules=extensions)
