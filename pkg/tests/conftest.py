import numpy as np
import pytest

from app.forge.curves import straight_circle, wavy_circle
from app.forge.grid import TorusGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def grid64():
    return TorusGrid.cubic(2, 64)


@pytest.fixture(scope="session")
def grid128():
    return TorusGrid.cubic(2, 128)


@pytest.fixture(scope="session")
def straight_M():
    return straight_circle((0.0, 0.5), (1, 0), 1024, name="M")


@pytest.fixture(scope="session")
def wavy_M():
    return wavy_circle(0.1, 4096)
