import numpy as np
import pytest

from dpplab.lattice import centered_lattice, GridFunction


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_grid_function(rng, half=1.5, h=0.15, dim=2, scale=1.0):
    lat = centered_lattice(half, h, dim)
    vals = scale * rng.standard_normal(lat.node_count)
    return GridFunction(lat, vals)


@pytest.fixture
def grid_function_factory(rng):
    def make(**kw):
        return random_grid_function(rng, **kw)
    return make
