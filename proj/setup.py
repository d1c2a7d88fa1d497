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
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                str(source_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DHYRSM_BUILD_TESTS=OFF",
                "-DHYRSM_BUILD_PYTHON=ON",
            ],
            cwd=build_dir,
            check=True,
        )
        subprocess.run(["cmake", "--build", ".", "--target", "_core", "-j"], cwd=build_dir, check=True)
        built = sorted((build_dir / "python" / "hyrsm").glob("_core*.so"))
        if not built:
            raise RuntimeError("cmake build produced no _core module")
        target = Path(self.get_ext_fullpath(ext.name))
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[-1], target)


setup(
    ext_modules=[CMakeExtension("hyrsm._core")],
    cmdclass={"build_ext": CMakeBuild},
)
