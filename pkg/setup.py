from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    # numpy fallback in cmgp._kernels_py is used at runtime
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "cmgp._kernels",
                ["src/cmgp/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
