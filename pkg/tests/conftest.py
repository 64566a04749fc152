import numpy as np
import pytest

from cavitylab.graphs import FiniteGraph


@pytest.fixture
def triangle():
    return FiniteGraph(3, [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
