"""Build script for the optional compiled ODE core.

The package works without the extension (a numpy fallback is selected at
import time); building it makes per-point adaptive transport much faster:

    python setup.py build_ext --inplace
"""
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/mixtransport/_ode_c.pyx"],
        language_level="3",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
