"""Build the optional compiled physics kernel.

If Cython or a C compiler is unavailable the package still installs and
``awerl.kernel`` falls back to the pure-Python implementation.
"""
import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure means fallback
            print(f"warning: compiled kernel not built ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using pure-Python fallback")


def extensions():
    if os.environ.get("AWERL_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "awerl._kernel",
        ["src/awerl/_kernel.pyx"],
        # FMA contraction and the sin/cos -> sincos merge both change rounding,
        # which would break bit-agreement with the Python fallback
        extra_compile_args=["-O2", "-ffp-contract=off", "-fno-builtin"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
