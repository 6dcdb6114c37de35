import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ovtl.lattice import Grid
from ovtl.spectral import make_lp_family


@pytest.fixture(scope="session")
def grid64():
    return Grid(1, 64)


@pytest.fixture(scope="session")
def grid128():
    return Grid(1, 128)


@pytest.fixture(scope="session")
def grid2d():
    return Grid(2, 32)


@pytest.fixture(scope="session")
def fam64(grid64):
    return make_lp_family(grid64)


@pytest.fixture(scope="session")
def fam128(grid128):
    return make_lp_family(grid128)
