"""Build script for the optional compiled edit-script kernel.

The package works without the extension: lenat.kernels falls back to the
pure-Python implementation when ``lenat.kernels._ckernels`` is missing.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "lenat.kernels._ckernels",
                ["src/lenat/kernels/_ckernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
