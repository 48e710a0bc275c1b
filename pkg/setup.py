import os

import numpy as np
from setuptools import setup

ext_modules = []
if os.environ.get("SFTEMBED_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("sftembed._kernels", ["src/sftembed/_kernels.pyx"],
                       include_dirs=[np.get_include()],
                       extra_compile_args=["-O3"])],
            language_level=3,
        )
    except ImportError:  # no Cython: the pure-Python kernels are used
        ext_modules = []

setup(ext_modules=ext_modules)
