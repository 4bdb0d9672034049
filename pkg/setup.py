import os

from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: the compiled core must produce bit-identical results to
# the pure-Python twin, so fused multiply-add contraction is disabled.
compile_args = ["-O3", "-ffp-contract=off"]
link_args = []
if not os.environ.get("OPINION_LAB_NO_OPENMP"):
    compile_args.append("-fopenmp")
    link_args.append("-fopenmp")

setup(
    ext_modules=cythonize(
        [
            Extension(
                "opinion_lab._core",
                ["src/opinion_lab/_core.pyx"],
                extra_compile_args=compile_args,
                extra_link_args=link_args,
            )
        ],
        language_level=3,
    )
)
