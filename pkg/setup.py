import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "fedsurv._speedups",
                ["src/fedsurv/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
else:
    # The package falls back to the pure-Python split scanner at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
