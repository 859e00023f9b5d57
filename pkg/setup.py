"""Build script for the optional compiled kernel core.

The package is fully functional without the extension (qsnn.kernels falls
back to the numpy implementations); set QSNN_SKIP_EXT=1 to skip compilation
entirely, e.g. on a machine without a C toolchain.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("QSNN_SKIP_EXT") != "1":
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "qsnn._core",
        sources=["src/qsnn/_core.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off keeps the C arithmetic bit-identical to the
        # numpy fallback (no FMA fusion of v*inv_tau + cur).
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": False,
        },
    )

setup(ext_modules=ext_modules)
