import sys

from setuptools import setup

# The compiled trial-loop kernel is optional: the package falls back to the
# pure-NumPy loop when the extension is absent (see ptgsr.backend).
ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ptgsr._speedup",
                ["src/ptgsr/_speedup.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"ptgsr: building without compiled kernel ({exc})\n")

setup(ext_modules=ext_modules)
