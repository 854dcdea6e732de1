"""Build script: compiles the optional Cython scan kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any build failure here downgrades to a pure
Python install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "shelab._scan",
                ["src/shelab/_scan.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: no FMA fusion, so results stay
                # bit-identical to the numpy fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # noqa: BLE001 - missing Cython/toolchain is non-fatal
    import sys

    print(f"shelab: building without compiled extension ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
