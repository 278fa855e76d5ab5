"""Build script for the optional compiled simulation kernel.

The Cython extension is best-effort: if Cython or a C compiler is missing the
package still installs and ``dmpa.simulator`` falls back to the pure-Python
kernel.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("DMPA_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "dmpa._ckernel",
                    ["src/dmpa/_ckernel.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
