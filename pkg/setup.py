"""Build script: compiles the optional Cython event-loop kernel.

The package works without the extension (a pure-Python kernel is selected
at import time), so a failed cythonize is downgraded to a warning.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy

    ext_modules = cythonize(
        ["src/iplab/_kernel_cy.pyx"],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
    include_dirs = [numpy.get_include()]
except Exception as exc:  # pragma: no cover
    print(f"warning: building without compiled kernel ({exc})", file=sys.stderr)
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
