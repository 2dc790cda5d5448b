import numpy as np
import pytest

from orlipde import GridDomain, GridFunction


@pytest.fixture
def line64():
    return GridDomain(1, 64, 2.0)


@pytest.fixture
def square32():
    return GridDomain(2, 32, 1.0)


@pytest.fixture
def square64():
    return GridDomain(2, 64, 1.0)


def cap_profile(domain, radius, center=None):
    grids = domain.node_grids()
    c = np.zeros(domain.n) if center is None else np.asarray(center, dtype=float)
    r2 = sum((g - ci) ** 2 for g, ci in zip(grids, c))
    vals = np.zeros(domain.shape)
    inside = r2 < radius**2
    vals[inside] = np.exp(-(radius**2) / (radius**2 - r2[inside]))
    return GridFunction(domain, vals)


@pytest.fixture
def bump():
    return cap_profile
