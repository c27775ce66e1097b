from setuptools import setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; slotshift falls back to the reference engine
    ext_modules = []
else:
    ext_modules = cythonize(
        ["src/slotshift/_kernel.pyx"],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
