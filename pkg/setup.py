"""Build the optional compiled search kernels.

The package imports and runs without them (a pure-Python fallback is
selected at import time), so a failed compile only costs speed.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DISTDESIGN_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "distdesign._kernels",
                    ["src/distdesign/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
