import numpy as np
import pytest

from varcap.space import build_graph


@pytest.fixture
def path5():
    """Unit path on ids 0..4, unit measures and weights."""
    nodes = [(i, 1.0, (float(i), 0.0)) for i in range(5)]
    edges = [(i, i + 1, 1.0) for i in range(4)]
    return build_graph(nodes, edges)


@pytest.fixture
def triangle():
    nodes = [(0, 1.0), (1, 2.0), (2, 0.5)]
    edges = [(0, 1, 1.0, 2.0), (1, 2, 1.0, 1.0), (0, 2, 1.0, 3.0)]
    return build_graph(nodes, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
