"""Build script: compiles the optional accelerator extension.

The package is fully functional without the extension (a pure-Python
fallback with identical semantics is selected at import time), so the
extension is marked optional and a failed compile does not fail the
install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # source dist without Cython: install pure-Python only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "chronoforge._kernels._ckernels",
                ["src/chronoforge/_kernels/_ckernels.pyx"],
                optional=True,
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
