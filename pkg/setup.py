"""Build hook for the optional compiled backend.

Everything except one Cython extension is pure Python.  When Cython or a
working C compiler is missing the extension is skipped with a warning and
the NumPy backend serves every call (see ``ssgeo.backends``).
"""
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Treat extension build failures as losing a speedup, not the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            warnings.warn(f"compiled backend skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled backend skipped ({ext.name}): {exc}")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython unavailable; building without the compiled backend")
        return []
    return cythonize(
        [
            Extension(
                "ssgeo.backends._speedups",
                ["src/ssgeo/backends/_speedups.pyx"],
            )
        ],
        language_level="3",
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
