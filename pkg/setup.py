"""Build the optional compiled kernel core.

The extension is marked optional: if it fails to compile, the package
falls back to the numpy implementation in ``virodiff._pykernels``.
"""
import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext_modules = cythonize(
    [
        Extension(
            "virodiff._ckernels",
            ["src/virodiff/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
            optional=True,
        )
    ],
    compiler_directives={"language_level": "3"},
)

setup(ext_modules=ext_modules)
