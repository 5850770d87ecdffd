"""Builds the optional compiled spectral core.

The package works without it: melflow.spectral falls back to the pure
numpy kernels when the extension is missing (see benchmarks/bench_spectral.py
for the speed comparison).
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "melflow._spectral_cy",
                ["src/melflow/_spectral_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
