"""Build script for the optional compiled kernels.

The package works without the extension; if Cython or a compiler is
missing the build falls back to the pure-Python kernels.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("OSCRIT_NO_EXT"):
    try:
        from Cython.Build import cythonize
        import numpy as np
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("oscrit._ckernels", ["src/oscrit/_ckernels.pyx"],
                       include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            language_level=3,
        )
    except Exception as exc:  # no Cython, numpy or compiler
        print(f"oscrit: building without compiled kernels ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
