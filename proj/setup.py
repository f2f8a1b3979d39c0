from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "bbmlab._bbmlab",
    sources=[
        "python/module.cpp",
        "src/rng.cpp",
        "src/engine.cpp",
        "src/observables.cpp",
        "src/bridge.cpp",
        "src/table.cpp",
        "src/experiments.cpp",
        "src/config.cpp",
    ],
    include_dirs=["include"],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
