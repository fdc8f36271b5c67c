from setuptools import Extension, setup
from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        [Extension("starbracket._kernels", sources=["src/starbracket/_kernels.pyx"])],
        compiler_directives={"language_level": 3},
    ),
)
