from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; dpnash falls back to the NumPy kernel
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("dpnash._ckernel", ["src/dpnash/_ckernel.pyx"], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
