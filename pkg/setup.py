import numpy as np
from setuptools import Extension, setup

# The compiled lifting kernels are optional: the package falls back to the
# NumPy implementation when the extension is absent (see voxwave.kernels).
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "voxwave.kernels._lifting",
                ["src/voxwave/kernels/_lifting.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
