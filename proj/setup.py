"""Build the _causalwalk extension through the project's CMake tree."""

import shutil
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            ["cmake", "-S", str(source), "-B", str(build_dir),
             "-DCMAKE_BUILD_TYPE=Release"],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_causalwalk"],
            check=True,
        )
        staged = sorted((build_dir / "python" / "causalwalk").glob("_causalwalk*"))
        if not staged:
            raise RuntimeError(
                "extension missing; is pybind11 visible to CMake?")
        dest = Path(self.get_ext_fullpath(ext.name)).resolve()
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(staged[0], dest)


setup(
    packages=["causalwalk"],
    package_dir={"": "python"},
    ext_modules=[CMakeExtension("causalwalk._causalwalk")],
    cmdclass={"build_ext": CMakeBuild},
)
