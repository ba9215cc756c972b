import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varcap.newtonian import (
    DiscreteFunction,
    EdgeFunction,
    lattice_max,
    lattice_min,
    min_upper_gradient,
    p_energy,
    pointwise_dilation,
    sample_paths,
    sobolev_norm_p,
    truncate,
    verify_upper_gradient,
)
from varcap.space import build_graph


def test_discrete_function_validation(path5):
    u = DiscreteFunction(path5, np.arange(5.0))
    assert u.to_list() == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert not u.values.flags.writeable
    with pytest.raises(ValueError, match="align"):
        DiscreteFunction(path5, np.zeros(3))
    with pytest.raises(ValueError, match="finite"):
        DiscreteFunction(path5, np.array([0, 1, np.nan, 3, 4.0]))
    c = DiscreteFunction.constant(path5, 2.5)
    assert set(c.to_list()) == {2.5}


def test_edge_function_validation(path5):
    EdgeFunction(path5, np.zeros(4))
    with pytest.raises(ValueError, match=">= 0"):
        EdgeFunction(path5, np.array([1.0, -0.1, 0.0, 0.0]))
    with pytest.raises(ValueError, match="align"):
        EdgeFunction(path5, np.zeros(2))


def test_min_upper_gradient_values(path5):
    u = DiscreteFunction(path5, np.array([0.0, 1.0, 1.0, 4.0, 2.0]))
    grad = min_upper_gradient(path5, u)
    npt.assert_allclose(grad.values, [1.0, 0.0, 3.0, 2.0])


def test_min_upper_gradient_scales_with_length():
    g = build_graph([(0, 1.0), (1, 1.0)], [(0, 1, 0.5)])
    u = DiscreteFunction(g, np.array([0.0, 1.0]))
    assert min_upper_gradient(g, u).values[0] == 2.0


def test_p_energy_and_sobolev_norm(triangle):
    u = DiscreteFunction(triangle, np.array([1.0, 0.0, 2.0]))
    grad = min_upper_gradient(triangle, u)
    # edges: (0,1) w=2 diff 1; (1,2) w=1 diff 2; (0,2) w=3 diff 1
    assert p_energy(triangle, grad, 2.0) == pytest.approx(2 + 4 + 3)
    assert p_energy(triangle, grad, 1.0) == pytest.approx(2 + 2 + 3)
    mass = 1 * 1 + 2 * 0 + 0.5 * 4
    assert sobolev_norm_p(triangle, u, 2.0) == pytest.approx(mass + 9)
    with pytest.raises(ValueError, match="p must be >= 1"):
        p_energy(triangle, grad, 0.5)


def test_cross_space_mismatch(path5, triangle):
    u = DiscreteFunction(path5, np.zeros(5))
    with pytest.raises(ValueError, match="space"):
        min_upper_gradient(triangle, u)


def test_truncate_and_dilation(path5):
    u = DiscreteFunction(path5, np.array([0.0, 3.0, 1.0, 5.0, 2.0]))
    t = truncate(u, 2.0)
    npt.assert_allclose(t.values, [0, 2, 1, 2, 2.0])
    dil = pointwise_dilation(path5, u)
    grad = min_upper_gradient(path5, u).values
    # nodewise max over incident edges dominates each incident quotient
    assert dil.values[1] == max(grad[0], grad[1])
    assert dil.values[0] == grad[0]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=5, max_size=5),
       st.lists(st.floats(-50, 50), min_size=5, max_size=5),
       st.sampled_from([1.0, 1.5, 2.0, 4.0]))
def test_lattice_energy_subadditivity(vals1, vals2, p):
    g = build_graph([(i, 1.0) for i in range(5)],
                    [(i, i + 1, 1.0) for i in range(4)])
    u1 = DiscreteFunction(g, np.array(vals1))
    u2 = DiscreteFunction(g, np.array(vals2))
    mx = min_upper_gradient(g, lattice_max(u1, u2)).values
    mn = min_upper_gradient(g, lattice_min(u1, u2)).values
    g1 = min_upper_gradient(g, u1).values
    g2 = min_upper_gradient(g, u2).values
    lhs = mx**p + mn**p
    rhs = g1**p + g2**p
    assert np.all(lhs <= rhs + 1e-12 * (1.0 + rhs))


def test_lattice_ops_basic(path5):
    u = DiscreteFunction(path5, np.array([0, 1, 2, 3, 4.0]))
    v = DiscreteFunction(path5, np.array([4, 3, 2, 1, 0.0]))
    npt.assert_allclose(lattice_max(u, v).values, [4, 3, 2, 3, 4])
    npt.assert_allclose(lattice_min(u, v).values, [0, 1, 2, 1, 0])


def test_verify_upper_gradient(path5):
    u = DiscreteFunction(path5, np.array([0.0, 1.0, 1.5, 1.5, 2.0]))
    grad = min_upper_gradient(path5, u)
    ok, worst = verify_upper_gradient(path5, u, grad, [[0, 1, 2, 3, 4]])
    assert ok and worst <= 1e-12
    # half the true gradient is not an upper gradient
    bad = EdgeFunction(path5, 0.5 * grad.values)
    ok2, worst2 = verify_upper_gradient(path5, u, bad, [[0, 1, 2, 3, 4]])
    assert not ok2 and worst2 == pytest.approx(1.0)
    with pytest.raises(ValueError, match="adjacent"):
        verify_upper_gradient(path5, u, grad, [[0, 2]])
    with pytest.raises(ValueError, match="two nodes"):
        verify_upper_gradient(path5, u, grad, [[0]])
    with pytest.raises(ValueError, match="no paths"):
        verify_upper_gradient(path5, u, grad, [])


def test_sample_paths_are_edge_paths(path5, rng):
    paths = sample_paths(path5, rng, n_paths=15, max_len=6)
    assert paths
    lut = path5.edge_lookup()
    for path in paths:
        assert len(path) >= 2
        idx = path5.index_of(np.asarray(path))
        for a, b in zip(idx, idx[1:]):
            assert (int(min(a, b)), int(max(a, b))) in lut
