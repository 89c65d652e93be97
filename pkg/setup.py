import os

from setuptools import Extension, setup

# The brute-force challenge search is the one hot loop in the package. It is
# compiled against OpenSSL's SHA-256 when Cython and a C toolchain are around;
# otherwise the pure-Python kernel in optoutswarm._pow_python is used.
ext_modules = []
if os.environ.get("OPTOUTSWARM_PURE_PYTHON") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "optoutswarm._powcore",
                    ["src/optoutswarm/_powcore.pyx"],
                    libraries=["crypto"],
                    define_macros=[("OPENSSL_API_COMPAT", "0x10100000L")],
                    optional=True,
                )
            ]
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
