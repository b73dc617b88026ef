"""Build script for the optional compiled BM25 kernel.

The extension is best-effort: if Cython or a C compiler is unavailable the
install still succeeds and the package falls back to the pure-Python kernel
at import time (see confuse.retrieval.kernel).
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "confuse.retrieval._bm25",
                sources=["src/confuse/retrieval/_bm25.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
