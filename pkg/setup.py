import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# CASIMIR_PORTABLE_BUILD=1 drops -march=native (for binaries copied to other machines)
flags = ["-O3", "-ffast-math"]
if os.environ.get("CASIMIR_PORTABLE_BUILD", "") in ("", "0"):
    flags.append("-march=native")

extensions = [
    Extension(
        "dampedcasimir._banded",
        ["src/dampedcasimir/_banded.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=flags,
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
