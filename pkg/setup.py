import os

import numpy as np
from setuptools import Extension, setup

# The compiled core is optional; the package falls back to pure Python if it
# is absent. TERRASEG_NO_EXT=1 skips the build entirely.
ext_modules = []
if not os.environ.get("TERRASEG_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "terraseg._core",
                ["src/terraseg/_core.pyx"],
                include_dirs=[np.get_include()],
                # fused multiply-add would break bitwise parity with the fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
