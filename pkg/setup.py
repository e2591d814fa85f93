"""Build the optional Cython kernel extension.

    pip install -e . --no-build-isolation

If Cython or a compiler is missing the package still installs and the
pure-NumPy kernels are used instead.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SALICON_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "salicon.kernels._ckernels",
                    ["src/salicon/kernels/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
