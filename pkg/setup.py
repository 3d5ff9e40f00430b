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
                "pfqr._ipqr",
                ["src/pfqr/_ipqr.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
else:
    # Pure-python fallback kernels are used when the extension is absent.
    ext_modules = []

setup(ext_modules=ext_modules)
