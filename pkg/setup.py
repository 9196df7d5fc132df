"""Build script for the compiled scan kernels.

The package is pure Python except for lidarsr._scan_core, a Cython
extension holding the sequential state-space scan loops.  If Cython or a
C compiler is unavailable the extension is skipped and the package falls
back to the numpy kernels at import time (see lidarsr.kernels).
"""

import sys

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "lidarsr._scan_core",
                sources=["src/lidarsr/_scan_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    print("warning: Cython not found, building without compiled scan kernels",
          file=sys.stderr)

setup(ext_modules=ext_modules)
