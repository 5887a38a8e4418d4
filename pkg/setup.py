"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so any build failure here downgrades to a pure-Python install
instead of aborting.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "bilex._kernels._fastops",
                ["src/bilex/_kernels/_fastops.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    sys.stderr.write(f"bilex: skipping Cython extension ({exc}); "
                     "falling back to the NumPy kernels\n")

setup(ext_modules=ext_modules)
