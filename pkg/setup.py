"""Build script: compiles the optional evaluation kernel.

The package is fully functional without the extension (a pure-Python
evaluator is selected at import time), so compilation failures are
non-fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/bocher/_kernel.pyx"],
        language_level="3",
        compiler_directives={"boundscheck": False, "wraparound": False},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"bocher: skipping compiled kernel ({exc}); pure-Python evaluator will be used")

setup(ext_modules=ext_modules)
