import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from varcap.space import (
    CLOSED,
    OPEN,
    UNKNOWN,
    Ball,
    Box,
    Halfspace,
    ListSet,
    NodeSet,
    SetOp,
    all_nodes,
    as_weight,
    boundary,
    build_graph,
    build_grid,
    closure,
    combine_openness,
    dilate,
    empty_set,
    interior,
    is_combinatorially_open,
    is_relatively_open,
    load_space,
    parse_predicate,
    resolve_set,
    restrict_ambient,
    save_space,
    space_from_dict,
)


# ---------------------------------------------------------------------------
# graph construction and validation


def test_build_graph_basic(triangle):
    assert triangle.n_nodes == 3
    assert triangle.n_edges == 3
    npt.assert_array_equal(triangle.ids, [0, 1, 2])
    npt.assert_allclose(triangle.measures, [1.0, 2.0, 0.5])
    assert triangle.total_measure == 3.5
    assert not triangle.has_positions


def test_edges_are_canonicalized():
    g = build_graph([(0, 1.0), (1, 1.0)], [(1, 0, 2.5)])
    assert g.edge_a[0] < g.edge_b[0]
    assert g.lengths[0] == 2.5
    assert g.eweights[0] == 1.0


@pytest.mark.parametrize(
    "nodes, edges, msg",
    [
        ([], [], "at least one node"),
        ([(0, 1.0), (0, 1.0)], [], "unique"),
        ([(0, -1.0)], [], "positive"),
        ([(0, 1.0)], [(0, 0, 1.0)], "self-loop"),
        ([(0, 1.0), (1, 1.0)], [(0, 1, -2.0)], "positive"),
        ([(0, 1.0), (1, 1.0)], [(0, 1, 1.0), (1, 0, 1.0)], "duplicate"),
        ([(0, 1.0), (1, 1.0)], [(0, 7, 1.0)], "unknown node id"),
    ],
)
def test_build_graph_rejects(nodes, edges, msg):
    with pytest.raises(ValueError, match=msg):
        build_graph(nodes, edges)


def test_positions_must_match_lengths():
    nodes = [(0, 1.0, (0.0, 0.0)), (1, 1.0, (3.0, 4.0))]
    with pytest.raises(ValueError, match="disagrees"):
        build_graph(nodes, [(0, 1, 1.0)])
    g = build_graph(nodes, [(0, 1, 5.0)])
    assert g.has_positions


def test_mixed_positions_rejected():
    with pytest.raises(ValueError, match="positions"):
        build_graph([(0, 1.0, (0.0,)), (1, 1.0)], [])


def test_arrays_are_immutable(path5):
    with pytest.raises(ValueError):
        path5.ids[0] = 99
    with pytest.raises(ValueError):
        path5.eweights[0] = 2.0


def test_index_of_and_has_ids(path5):
    npt.assert_array_equal(path5.index_of([4, 0]), [4, 0])
    assert path5.has_ids([0, 1, 2])
    assert not path5.has_ids([17])
    with pytest.raises(ValueError, match="unknown node id"):
        path5.index_of([17])


def test_neighbors_and_edge_lookup(path5):
    assert sorted(path5.neighbors(0)) == [1]
    assert sorted(path5.neighbors(2)) == [1, 3]
    lut = path5.edge_lookup()
    assert lut[(0, 1)] == 0
    assert (0, 2) not in lut
    assert len(path5.incident_edges(2)) == 2


def test_component_labels():
    g = build_graph([(0, 1.0), (1, 1.0), (2, 1.0)], [(0, 1, 1.0)])
    labels = g.component_labels()
    assert labels[0] == labels[1]
    assert labels[2] != labels[0]


def test_space_hash_changes_with_data(path5):
    other = build_graph(
        [(i, 1.0, (float(i), 0.0)) for i in range(5)],
        [(i, i + 1, 1.0, 2.0) for i in range(4)],
    )
    assert path5.space_hash != other.space_hash
    assert path5.space_hash == path5.space_hash


# ---------------------------------------------------------------------------
# predicates and weights


def test_parse_predicate_roundtrip():
    spec = {
        "union": [
            {"ball": {"center": [0, 0], "r": 1}},
            {"box": {"lo": [0, 0], "hi": [1, 1]}, "open": False},
        ]
    }
    pred = parse_predicate(spec)
    assert isinstance(pred, SetOp)
    assert pred.openness() == UNKNOWN
    with pytest.raises(ValueError, match="unrecognized"):
        parse_predicate({"wedge": {}})
    with pytest.raises(ValueError, match="JSON object"):
        parse_predicate([1, 2])


def test_predicate_contains():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.5]])
    ball = Ball((0.0, 0.0), 1.0)
    npt.assert_array_equal(ball.contains(pts), [True, False, True])
    closed = Ball((0.0, 0.0), 1.0, open=False)
    npt.assert_array_equal(closed.contains(pts), [True, True, True])
    hs = Halfspace((1.0, 0.0), 0.5)
    npt.assert_array_equal(hs.contains(pts), [True, False, False])
    diff = SetOp("diff", (closed, hs))
    npt.assert_array_equal(diff.contains(pts), [False, True, True])
    assert diff.openness() == CLOSED
    assert SetOp("diff", (ball, closed)).openness() == OPEN
    assert SetOp("diff", (ball, ball)).openness() == UNKNOWN


def test_box_validation():
    with pytest.raises(ValueError, match="exceeds"):
        Box((1.0,), (0.0,))
    with pytest.raises(ValueError, match="dimension"):
        Box((0.0, 0.0), (1.0,))
    b = Box((0.0,), (1.0,), open_lo=(True,), open_hi=(True,))
    assert b.openness() == OPEN


def test_setop_validation():
    with pytest.raises(ValueError, match="unknown set operation"):
        SetOp("xor", (Ball((0,), 1),))
    with pytest.raises(ValueError, match="two operands"):
        SetOp("diff", (Ball((0,), 1),))


def test_combine_openness_rules():
    assert combine_openness("union", [OPEN, OPEN]) == OPEN
    assert combine_openness("inter", [CLOSED, CLOSED]) == CLOSED
    assert combine_openness("union", [OPEN, CLOSED]) == UNKNOWN
    assert combine_openness("diff", [OPEN, CLOSED]) == OPEN
    assert combine_openness("diff", [CLOSED, OPEN]) == CLOSED
    assert combine_openness("diff", [OPEN, OPEN]) == UNKNOWN


def test_as_weight_variants():
    pts = np.array([[3.0, 4.0], [0.0, 1.0]])
    npt.assert_allclose(as_weight(None)(pts), [1.0, 1.0])
    npt.assert_allclose(as_weight(2.5)(pts), [2.5, 2.5])
    npt.assert_allclose(as_weight({"const": 3})(pts), [3.0, 3.0])
    npt.assert_allclose(as_weight({"radial_power": 2})(pts), [25.0, 1.0])
    npt.assert_allclose(as_weight(lambda x: x[:, 0])(pts), [3.0, 0.0])
    with pytest.raises(ValueError):
        as_weight({"mystery": 1})


# ---------------------------------------------------------------------------
# rasterization


def test_build_grid_unit_square_counts():
    g = build_grid({"box": {"lo": [0, 0], "hi": [1, 1]}}, 0.5)
    assert g.n_nodes == 9
    assert g.n_edges == 12
    assert g.mesh_size == 0.5
    assert g.dimension_hint == 2
    npt.assert_allclose(g.measures, 0.25)
    npt.assert_allclose(g.lengths, 0.5)
    # interior degree 4, corner degree 2
    degs = np.zeros(9)
    np.add.at(degs, g.edge_a, 1)
    np.add.at(degs, g.edge_b, 1)
    assert sorted(degs)[:4] == [2, 2, 2, 2]
    assert max(degs) == 4


def test_build_grid_matches_bruteforce_membership():
    dom = {
        "diff": [
            {"ball": {"center": [0, 0], "r": 1.0}, "open": False},
            {"ball": {"center": [0, 0], "r": 0.4}},
        ]
    }
    h = 0.125
    g = build_grid(dom, h)
    pred = parse_predicate(dom)
    # brute force over the bounding lattice box
    ks = np.arange(-8, 9)
    expect = set()
    for i in ks:
        for j in ks:
            pt = np.array([[i * h, j * h]])
            if pred.contains(pt)[0]:
                expect.add((i, j))
    got = {tuple(np.round(p / h).astype(int)) for p in g.positions}
    assert got == expect


def test_build_grid_refinement_ratio():
    dom = {"ball": {"center": [0, 0], "r": 1.0}, "open": False}
    n_coarse = build_grid(dom, 1 / 8).n_nodes
    n_fine = build_grid(dom, 1 / 16).n_nodes
    ratio = n_fine / n_coarse
    assert 4 * 0.8 <= ratio <= 4 * 1.2


def test_build_grid_weighted_edges():
    g = build_grid({"box": {"lo": [0], "hi": [1]}}, 0.5,
                   weight=lambda pts: 1.0 + pts[:, 0])
    npt.assert_allclose(sorted(g.measures), [0.5, 0.75, 1.0])
    npt.assert_allclose(sorted(g.eweights), [0.625, 0.875])


def test_build_grid_rejects():
    with pytest.raises(ValueError, match="geometric"):
        build_grid({"list": [1, 2]}, 0.5)
    with pytest.raises(ValueError, match="positive"):
        build_grid({"box": {"lo": [0], "hi": [1]}}, -0.5)
    with pytest.raises(ValueError, match="bounded"):
        build_grid({"halfspace": {"normal": [1.0], "offset": 0.0}}, 0.5)
    with pytest.raises(ValueError, match="empty rasterization"):
        build_grid({"ball": {"center": [0.25, 0.25], "r": 0.01}}, 0.5)
    with pytest.raises(ValueError, match="weight field"):
        build_grid({"box": {"lo": [0], "hi": [1]}}, 0.5,
                   weight=lambda pts: pts[:, 0] - 10.0)


def test_restrict_matches_rebuild():
    dom = {"box": {"lo": [0, 0], "hi": [1, 1]}}
    half = {"inter": [dom, {"halfspace": {"normal": [0.0, 1.0],
                                          "offset": 0.5, "open": False}}]}
    g = build_grid(dom, 0.25)
    sub = restrict_ambient(g, resolve_set(g, half))
    rebuilt = build_grid(half, 0.25)
    assert sub.n_nodes == rebuilt.n_nodes
    assert sub.n_edges == rebuilt.n_edges
    order_a = np.lexsort(sub.positions.T)
    order_b = np.lexsort(rebuilt.positions.T)
    npt.assert_allclose(sub.positions[order_a], rebuilt.positions[order_b])
    npt.assert_allclose(sub.measures[order_a], rebuilt.measures[order_b])
    npt.assert_allclose(np.sort(sub.eweights), np.sort(rebuilt.eweights))


# ---------------------------------------------------------------------------
# node sets


def test_nodeset_algebra():
    a = NodeSet(np.array([3, 1, 1, 2]), OPEN)
    b = NodeSet(np.array([2, 4]), OPEN)
    npt.assert_array_equal(a.ids, [1, 2, 3])
    assert len(a) == 3 and 2 in a and 5 not in a
    assert a.union(b).openness == OPEN
    assert a.intersect(b).openness == OPEN
    npt.assert_array_equal(a.difference(b).ids, [1, 3])
    c = NodeSet(np.array([2]), CLOSED)
    assert a.union(c).openness == UNKNOWN
    assert a.difference(c).openness == OPEN
    assert NodeSet(np.array([1, 2]), OPEN) == NodeSet(np.array([2, 1]), OPEN)
    assert NodeSet(np.array([1]), OPEN) != NodeSet(np.array([1]), CLOSED)
    assert empty_set().is_empty
    with pytest.raises(ValueError, match="openness"):
        NodeSet(np.array([1]), "ajar")


def test_resolve_set_tags(path5):
    s = resolve_set(path5, {"list": [0, 2]})
    assert s.openness == UNKNOWN
    npt.assert_array_equal(s.ids, [0, 2])
    geo = resolve_set(path5, {"box": {"lo": [0.5], "hi": [2.5]},
                              "open": True})
    # path5 nodes sit at x = 0..4 with a second zero coordinate
    with pytest.raises(ValueError):
        resolve_set(build_graph([(0, 1.0)], []), {"ball": {"center": [0], "r": 1}})
    assert geo.openness == OPEN


def test_all_nodes(path5):
    s = all_nodes(path5)
    assert len(s) == 5


# ---------------------------------------------------------------------------
# combinatorial topology


def test_interior_closure_boundary(path5):
    s = NodeSet(np.array([1, 2, 3]), CLOSED)
    npt.assert_array_equal(interior(path5, s).ids, [2])
    npt.assert_array_equal(closure(path5, s).ids, [0, 1, 2, 3, 4])
    # closed tag: inner rim
    npt.assert_array_equal(boundary(path5, s).ids, [1, 3])
    # untagged: two-sided layer
    npt.assert_array_equal(boundary(path5, s.tagged(UNKNOWN)).ids, [0, 1, 3, 4])
    assert not is_combinatorially_open(path5, s)
    assert is_combinatorially_open(path5, all_nodes(path5))


def test_relatively_open(path5):
    sub = NodeSet(np.array([1, 2]))
    within = NodeSet(np.array([1, 2, 3]))
    assert not is_relatively_open(path5, sub, within)
    # node 3 separates: the only ambient neighbor of a member is a member
    assert is_relatively_open(path5, NodeSet(np.array([0, 1])),
                              NodeSet(np.array([0, 1, 3, 4])))
    assert is_relatively_open(path5, within, within)


def test_dilate_euclidean(path5):
    s = NodeSet(np.array([2]))
    d = dilate(path5, s, 1.0)
    npt.assert_array_equal(d.ids, [1, 2, 3])
    assert d.openness == OPEN
    assert dilate(path5, empty_set(), 1.0).is_empty
    with pytest.raises(ValueError, match="positive"):
        dilate(path5, s, 0.0)


def test_dilate_graph_metric(triangle):
    # no positions: shortest-path distance along lengths
    d = dilate(triangle, NodeSet(np.array([0])), 1.0)
    npt.assert_array_equal(d.ids, [0, 1, 2])
    d2 = dilate(triangle, NodeSet(np.array([0])), 0.5)
    npt.assert_array_equal(d2.ids, [0])


def test_restrict_ambient_keeps_ids(path5):
    sub = restrict_ambient(path5, NodeSet(np.array([2, 3, 4])))
    npt.assert_array_equal(sub.ids, [2, 3, 4])
    assert sub.n_edges == 2
    with pytest.raises(ValueError, match="empty"):
        restrict_ambient(path5, empty_set())
    with pytest.raises(ValueError, match="unknown"):
        restrict_ambient(path5, NodeSet(np.array([77])))


# ---------------------------------------------------------------------------
# serialization


def test_save_load_roundtrip(tmp_path):
    g = build_grid({"box": {"lo": [1, 1], "hi": [2, 1.5]}}, 0.25,
                   weight={"radial_power": 1})
    f = tmp_path / "space.json"
    save_space(g, f)
    g2 = load_space(f)
    assert g2.space_hash == g.space_hash
    assert g2.mesh_size == g.mesh_size
    assert g2.dimension_hint == g.dimension_hint


def test_space_from_dict_errors():
    with pytest.raises(ValueError, match="nodes"):
        space_from_dict({"edges": []})
    doc = {"nodes": [{"id": 0, "measure": 1.0}], "edges": []}
    g = space_from_dict(doc)
    assert g.n_nodes == 1 and g.mesh_size is None
