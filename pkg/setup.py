"""Builds the compiled simplex pivot kernel.

The package works without the extension (a pure-NumPy kernel is selected at
import time), so a failed compile only costs speed.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    # -ffp-contract=off keeps the compiled kernel's arithmetic identical to
    # the NumPy fallback (no FMA contraction).
    ext_modules = cythonize(
        [
            Extension(
                "equicomm._simplex_cy",
                ["src/equicomm/_simplex_cy.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
