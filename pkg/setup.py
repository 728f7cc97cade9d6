"""Build hook for the compiled kernel extension.

The package works without the extension (numpy fallback in skewlab._pure);
failures here degrade to a pure install rather than aborting.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"skewlab: building without compiled kernels ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "skewlab._kernels",
        ["src/skewlab/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions())
