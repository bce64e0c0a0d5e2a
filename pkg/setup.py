"""Builds the optional Cython LAP kernel.

The package works without it: ``cdom.lap`` falls back to a numpy
implementation of the same algorithm when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("CDOM_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "cdom._lap_ext",
                    ["src/cdom/_lap_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
