# Build the compiled kernels; the package falls back to klab._kernels_py
# when the extension is missing.
#   pip install -e . --no-build-isolation
#   python setup.py build_ext --inplace
import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "klab._kernels",
        ["src/klab/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
