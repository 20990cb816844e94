"""Build the compiled kernels. The package still imports without them."""

import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("KRIGAUG_NO_EXTENSION"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                name="krigaug._ckernels",
                sources=["src/krigaug/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
