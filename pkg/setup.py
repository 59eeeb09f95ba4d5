"""Build script for the optional compiled assembly kernel.

The package works without the extension: ``sparseiga._kernels`` falls back
to a NumPy implementation when the compiled module is absent, so the
extension is marked optional and a failed compile does not fail the install.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext = Extension(
        "sparseiga._kernels._compiled",
        sources=["src/sparseiga/_kernels/_compiled.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
