"""Build hooks for the optional compiled kernel.

The package is fully functional without the extension; ccopf.kernels falls
back to the NumPy implementation when ccopf.kernels._fast is absent. Any
failure here (no Cython, no C compiler) downgrades to a pure build instead
of aborting the install.
"""
from __future__ import annotations

import logging

from setuptools import setup
from setuptools.command.build_ext import build_ext

log = logging.getLogger("ccopf.setup")


class OptionalBuildExt(build_ext):
    """Swallow compiler failures: the extension is an accelerator, not a dependency."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            log.warning("compiled kernel skipped: %s", exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            log.warning("compiled kernel %s skipped: %s", ext.name, exc)


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        log.warning("compiled kernel skipped (missing build tool): %s", exc)
        return []
    ext = Extension(
        "ccopf.kernels._fast",
        ["src/ccopf/kernels/_fast.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off keeps the C arithmetic aligned with the NumPy
        # backend operation-for-operation (no FMA contraction surprises).
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
