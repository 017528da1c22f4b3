import numpy as np
import pytest

from scatterqual.domain import ConvexDomain


@pytest.fixture
def square():
    return ConvexDomain.unit_cube(2)


@pytest.fixture
def interval():
    return ConvexDomain.box([0.0], [1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
