"""Build script: compiles the optional accelerator extension.

The package is fully functional without the extension; pure-Python
fallbacks are selected at import when the build is unavailable.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "plocal._kernels",
                ["src/plocal/_kernels.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
