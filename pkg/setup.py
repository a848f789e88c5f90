"""Build script: compiles the optional Cython kernel extension.

The extension is strictly optional -- if Cython or a C compiler is missing
the install proceeds and the package falls back to the numpy kernels at
import time. Set REGIONSTYLE_PURE=1 to skip the compile entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Never fail the install because the extension would not compile."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, broken toolchain, ...
            print(f"warning: skipping compiled kernels ({exc}); "
                  f"numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); "
                  f"numpy fallback will be used")


def extensions():
    if os.environ.get("REGIONSTYLE_PURE", "") not in ("", "0"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "regionstyle._kernels._ext",
        sources=["src/regionstyle/_kernels/_ext.pyx"],
        # -ffp-contract=off keeps the compiled loops bit-compatible with the
        # numpy fallback (no fused multiply-add reassociation).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
