"""Build script for the optional compiled forward kernel.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it just makes the reservoir simulation faster.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "dfa_esn._kernels._forward",
    ["src/dfa_esn/_kernels/_forward.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize(ext, language_level=3))
