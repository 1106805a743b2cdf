"""Build script for the optional compiled kernels.

The Cython extension is marked optional: when the compiler or OpenMP is
missing the build carries on and ``fractint`` falls back to the numpy
kernels at import time.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("FRACTINT_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext = Extension(
            "fractint._ckernels",
            ["src/fractint/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3", "-fopenmp"],
            extra_link_args=["-fopenmp"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            optional=True,
        )
        ext_modules = cythonize([ext], language_level=3, quiet=True)

setup(ext_modules=ext_modules)
