import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# No -ffast-math / -march=native: distances must stay bit-identical to the
# numpy fallback, so FP contraction and reassociation are off.
compile_args = ["-O3", "-ffp-contract=off"]
link_args = []
if os.environ.get("VOCABEMBED_NO_OPENMP") != "1":
    compile_args.append("-fopenmp")
    link_args.append("-fopenmp")

extensions = [
    Extension(
        "vocabembed._scan",
        ["src/vocabembed/_scan.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=compile_args,
        extra_link_args=link_args,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
