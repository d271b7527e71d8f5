import numpy as np
import pytest

from uppe_green.models.green import make_green_spec
from uppe_green.models.spectral_core import Field, make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_grid():
    return make_grid((4, 4, 4, 4), (1.0, 1.0, 1.0, 1.0))


@pytest.fixture
def small_grid():
    return make_grid((8, 8, 8, 16), (1.0, 1.0, 1.0, 0.5))


@pytest.fixture
def desk_grid():
    return make_grid((16, 16, 16, 32), (1.0, 1.0, 1.0, 1.0))


@pytest.fixture
def desk_spec(desk_grid):
    return make_green_spec(desk_grid, branch_policy="evanescent_zero")


@pytest.fixture
def random_field(rng):
    def build(grid):
        data = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        return Field.physical(grid, data)
    return build
