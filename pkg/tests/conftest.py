import sys
from pathlib import Path

import pytest

from elastomono.geometry import build_mesh, build_partition, build_patches
from elastomono.monotests import ALUMINIUM, MAKROLON, MaterialSpec
from elastomono.ntd import ForwardModel

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def desk():
    """n=6 mesh, 27 pixels, 20 patches."""
    mesh = build_mesh(6)
    return ForwardModel(build_patches(mesh, 2)), build_partition(mesh, 3)


@pytest.fixture(scope="session")
def small():
    """n=4 mesh, 2x2x2 pixels, one patch per loaded face."""
    mesh = build_mesh(4)
    return ForwardModel(build_patches(mesh, 1)), build_partition(mesh, 2)


@pytest.fixture(scope="session")
def tiny():
    mesh = build_mesh(2)
    return ForwardModel(build_patches(mesh, 1)), build_partition(mesh, 2)


@pytest.fixture(scope="session")
def stiffer_spec():
    return MaterialSpec.from_materials(MAKROLON, ALUMINIUM)


@pytest.fixture(scope="session")
def softer_spec():
    return MaterialSpec.from_materials(ALUMINIUM, MAKROLON)


@pytest.fixture
def acceptance_log(capsys):
    """Print one verdict line per criterion, bypassing output capture."""
    def log(name, passed, detail=""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {'PASS' if passed else 'FAIL'} | {name} | {detail}")
    return log
