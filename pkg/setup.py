"""Build script for the optional compiled integration kernel.

The extension is a pure speedup: if Cython or a C compiler is unavailable
the build falls back to the pure-Python loop (set MANIFOLD_DESCENT_NO_EXT=1
to skip the extension on purpose).  -ffp-contract=off keeps the compiled
arithmetic bit-compatible with numpy (no FMA contraction).
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken: fall back
            print(f"warning: skipping compiled kernel ({exc}); using the pure-Python loop")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: skipping {ext.name} ({exc}); using the pure-Python loop")


ext_modules = []
cmdclass = {}
if os.environ.get("MANIFOLD_DESCENT_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "manifold_descent._loop_cy",
                    ["src/manifold_descent/_loop_cy.pyx"],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
        cmdclass = {"build_ext": optional_build_ext}
    except ImportError:
        print("warning: Cython not available; using the pure-Python loop")

setup(ext_modules=ext_modules, cmdclass=cmdclass)
