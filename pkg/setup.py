"""Build script: compiles the optional row-reduction extension.

The package is fully functional without the extension; bvcalc._kernels
falls back to the pure-Python implementation at import time.
"""

from setuptools import setup

extensions = []
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        ["src/bvcalc/_rref_cy.pyx"],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # Cython missing or compiler unavailable
    print(f"bvcalc: skipping compiled kernel ({exc}); pure-Python fallback will be used")

setup(ext_modules=extensions)
