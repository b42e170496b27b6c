"""Build script for the optional compiled metric kernels.

The package works without the extension: textbridge.metrics falls back to
the pure-Python kernels when the compiled module is missing or when
TEXTBRIDGE_PURE=1 is set.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "textbridge.metrics._kernels_c",
                ["src/textbridge/metrics/_kernels_c.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    extensions = []

setup(ext_modules=extensions)
