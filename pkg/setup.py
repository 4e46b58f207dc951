"""Build hook for the optional compiled GF(2)/Pauli kernels.

The package is fully functional without the extension; ``opaqnet.stabilizer.kernels``
falls back to the pure-Python implementation when the module is missing.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("OPAQNET_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "opaqnet.stabilizer._ckernels",
                    ["src/opaqnet/stabilizer/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )

setup(ext_modules=ext_modules)
