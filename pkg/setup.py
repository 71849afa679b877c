import os

from Cython.Build import cythonize
from setuptools import Extension, setup

cache_line = os.environ.get("STREAMFARM_CACHE_LINE", "64")
extra = ["/O2"] if os.name == "nt" else ["-O3"]

ext = Extension(
    "streamfarm._core",
    sources=["src/streamfarm/_core.pyx"],
    include_dirs=["src/streamfarm"],
    define_macros=[("FF_CACHE_LINE", cache_line)],
    extra_compile_args=extra,
)

setup(
    ext_modules=cythonize(
        [ext],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
