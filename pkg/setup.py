import os

from setuptools import Extension, setup

# The compiled stencil kernels are optional: set STRINGLAB_PURE=1 to skip
# them (the package falls back to the numpy implementations at import).
ext_modules = []
if not os.environ.get("STRINGLAB_PURE"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "stringlab._kernels",
                    ["src/stringlab/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
