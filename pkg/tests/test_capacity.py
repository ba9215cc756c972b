import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varcap.capacity import (
    ambient_comparison,
    boundary_capacity_check,
    default_tilde_family,
    outer_capacity_profile,
    path_capacity_oracle,
    radial_condenser_oracle,
    sobolev_capacity,
    sphere_surface_area,
    tilde_capacity,
    variational_capacity,
)
from varcap.fixtures import (
    annulus,
    dense_disk,
    grid9,
    path_fixture,
    radial_condenser_path,
)
from varcap.newtonian import min_upper_gradient, p_energy
from varcap.solver import SolverConfig
from varcap.space import (
    CLOSED,
    OPEN,
    UNKNOWN,
    NodeSet,
    all_nodes,
    boundary,
    dilate,
    empty_set,
)


# ---------------------------------------------------------------------------
# oracles


def test_path_oracle_values():
    assert path_capacity_oracle([1.0, 1.0], 2.0) == pytest.approx(0.5)
    assert path_capacity_oracle([2.0], 3.0) == pytest.approx(2.0)
    # series resistance composition at p = 2
    assert path_capacity_oracle([2.0, 3.0], 2.0) == pytest.approx(
        1.0 / (1 / 2 + 1 / 3))
    with pytest.raises(ValueError):
        path_capacity_oracle([], 2.0)
    with pytest.raises(ValueError):
        path_capacity_oracle([1.0, -1.0], 2.0)


def test_sphere_surface_area():
    assert sphere_surface_area(2) == pytest.approx(2 * math.pi)
    assert sphere_surface_area(3) == pytest.approx(4 * math.pi)
    assert sphere_surface_area(4) == pytest.approx(2 * math.pi**2)


def test_radial_oracle_closed_forms():
    # 2-D, p = 2: 2 pi / log(R / r)
    assert radial_condenser_oracle(1.0, math.e, 2.0, 2) == pytest.approx(
        2 * math.pi, rel=1e-10)
    # 3-D, p = 2: 4 pi / (1/r - 1/R)
    assert radial_condenser_oracle(1.0, 2.0, 2.0, 3) == pytest.approx(
        4 * math.pi / (1 - 0.5), rel=1e-10)
    # p = n with weight 1: conformal case, also logarithmic
    v = radial_condenser_oracle(1.0, math.e, 3.0, 3)
    assert v == pytest.approx(4 * math.pi, rel=1e-8)


def test_radial_oracle_inf_sentinel():
    # weight that touches zero inside the interval
    bad = radial_condenser_oracle(1.0, 2.0, 2.0, 2,
                                  weight=lambda s: s - 1.5)
    assert math.isinf(bad)


def test_radial_oracle_validation():
    with pytest.raises(ValueError):
        radial_condenser_oracle(2.0, 1.0, 2.0, 2)
    with pytest.raises(ValueError):
        radial_condenser_oracle(1.0, 2.0, 0.5, 2)
    with pytest.raises(ValueError):
        radial_condenser_oracle(1.0, 2.0, 2.0, 0)


# ---------------------------------------------------------------------------
# variational capacity


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=2, max_size=8),
       st.sampled_from([1.5, 2.0, 3.0]))
def test_capacity_matches_path_oracle(weights, p):
    fx = path_fixture(weights)
    r = variational_capacity(fx.g, fx.a_set, fx.e_set, p,
                             cfg=SolverConfig(p=p))
    assert r.converged
    assert r.value == pytest.approx(path_capacity_oracle(weights, p),
                                    rel=1e-8)


def test_empty_a_gives_zero(path5):
    e = all_nodes(path5)
    r = variational_capacity(path5, empty_set(), e, 2.0)
    assert r.value == 0.0
    assert r.converged
    assert np.all(r.potential.values == 0.0)


def test_validation_errors(path5):
    e = NodeSet(np.array([0, 1, 2]))
    with pytest.raises(ValueError, match="contained"):
        variational_capacity(path5, NodeSet(np.array([4])), e, 2.0)
    with pytest.raises(ValueError, match="unknown"):
        variational_capacity(path5, empty_set(), NodeSet(np.array([9])), 2.0)
    with pytest.raises(ValueError, match="p"):
        variational_capacity(path5, empty_set(), e, 0.2)


def test_potential_is_clipped_and_energy_unsmoothed():
    fx = path_fixture([1.0, 2.0, 0.5])
    r = variational_capacity(fx.g, fx.a_set, fx.e_set, 1.5,
                             cfg=SolverConfig(p=1.5, epsilon_reg=1e-6))
    assert np.all(r.potential.values >= 0.0)
    assert np.all(r.potential.values <= 1.0)
    recomputed = p_energy(fx.g, min_upper_gradient(fx.g, r.potential), 1.5)
    assert r.value == recomputed


def test_touch_flag():
    fx = grid9()
    r = variational_capacity(fx.g, fx.a_set, fx.e_set, 2.0)
    assert r.flags["A_touches_boundary"] is False
    # A equal to E touches the rim by construction
    r2 = variational_capacity(fx.g, fx.e_set, fx.e_set, 2.0)
    assert r2.flags["A_touches_boundary"] is True


def test_to_json_dict():
    fx = path_fixture([1.0, 1.0])
    r = variational_capacity(fx.g, fx.a_set, fx.e_set, 2.0)
    doc = r.to_json_dict()
    assert set(doc) == {"value", "converged", "iterations", "flags"}
    doc2 = r.to_json_dict(potential_file="u.json")
    assert doc2["potential_file"] == "u.json"


def test_capacity_of_whole_set_is_rim_energy():
    # u = indicator of E, so only the straddling edges contribute
    fx = grid9()
    g = fx.g
    r = variational_capacity(g, fx.e_set, fx.e_set, 2.0)
    e_mask = np.zeros(g.n_nodes, dtype=bool)
    e_mask[g.index_of(fx.e_set.ids)] = True
    straddle = e_mask[g.edge_a] != e_mask[g.edge_b]
    kappa = g.eweights / g.lengths**2
    assert r.value == pytest.approx(float(kappa[straddle].sum()))


# ---------------------------------------------------------------------------
# sobolev capacity


def test_sobolev_capacity_small():
    fx = path_fixture([1.0, 1.0])
    r = sobolev_capacity(fx.g, fx.a_set, 2.0)
    u = r.potential.values
    expect = float(np.dot(fx.g.measures, u**2)) + p_energy(
        fx.g, min_upper_gradient(fx.g, r.potential), 2.0)
    assert r.value == pytest.approx(expect)
    assert u[0] == 1.0
    # no zero pin: the free tail sits strictly between 0 and 1
    assert 0.0 < u[2] < 1.0


def test_sobolev_empty_is_zero(path5):
    assert sobolev_capacity(path5, empty_set(), 2.0).value == 0.0


def test_sobolev_dominates_variational():
    fx = grid9()
    cap = variational_capacity(fx.g, fx.a_set, fx.e_set, 2.0).value
    sob = sobolev_capacity(fx.g, fx.a_set, 2.0).value
    assert sob > 0
    # C_p(A) controls cap through the zero-boundary Poincare inequality,
    # and conversely the capacitary potential is admissible for C_p
    mu_e = float(fx.g.measures[fx.g.index_of(fx.e_set.ids)].sum())
    assert sob <= (1.0 + mu_e) * max(cap, 1.0) + 1e-9


# ---------------------------------------------------------------------------
# outer profile and tilde


def test_outer_profile_monotone_and_exact():
    fx = grid9()
    h = fx.g.min_edge_length
    prof = outer_capacity_profile(fx.g, fx.a_set, fx.e_set, 2.0,
                                  [4 * h, 2 * h, 0.45 * h])
    assert prof.is_nonincreasing()
    cap = variational_capacity(fx.g, fx.a_set, fx.e_set, 2.0).value
    assert prof.limit == pytest.approx(cap, abs=1e-9)
    assert prof.values[-1] == prof.limit
    assert len(prof.results) == 3


def test_outer_profile_validation():
    fx = grid9()
    with pytest.raises(ValueError, match="nonempty"):
        outer_capacity_profile(fx.g, fx.a_set, fx.e_set, 2.0, [])
    with pytest.raises(ValueError, match="decreasing"):
        outer_capacity_profile(fx.g, fx.a_set, fx.e_set, 2.0, [0.1, 0.2])
    with pytest.raises(ValueError, match="positive"):
        outer_capacity_profile(fx.g, fx.a_set, fx.e_set, 2.0, [0.1, -0.2])


def test_tilde_empty_family_is_inf():
    fx = grid9()
    r = tilde_capacity(fx.g, fx.a_set, fx.e_set, 2.0, family=[])
    assert math.isinf(r.value)
    assert r.potential is None
    assert r.flags["family_size"] == 0


def test_tilde_dominates_cap_default_family():
    fx = grid9()
    cap = variational_capacity(fx.g, fx.a_set, fx.e_set, 2.0)
    til = tilde_capacity(fx.g, fx.a_set, fx.e_set, 2.0)
    assert til.value >= cap.value - 1e-12
    assert til.flags["family_size"] >= 1
    assert 0 <= til.flags["argmin_member"] < til.flags["family_size"]


def test_tilde_family_validation():
    fx = grid9()
    g = fx.g
    outside = NodeSet(np.array([0]))  # a corner node outside E
    with pytest.raises(ValueError, match="A <= G <= E"):
        tilde_capacity(g, fx.a_set, fx.e_set, 2.0, family=[outside])
    # a superset that is neither tagged open nor relatively open
    ragged = fx.a_set.union(NodeSet(np.array([40]))).tagged(UNKNOWN)
    if ragged.issubset(fx.e_set):
        with pytest.raises(ValueError, match="relatively open"):
            tilde_capacity(g, fx.a_set, fx.e_set, 2.0, family=[ragged])


def test_tilde_accepts_open_tag_as_certificate():
    fx = grid9()
    blown = dilate(fx.g, fx.a_set, 2 * fx.g.min_edge_length)
    member = blown.intersect(fx.e_set).tagged(OPEN)
    r = tilde_capacity(fx.g, fx.a_set, fx.e_set, 2.0, family=[member])
    assert r.value == pytest.approx(
        variational_capacity(fx.g, member, fx.e_set, 2.0).value)


def test_default_tilde_family_includes_open_e():
    fx = grid9()
    fam = default_tilde_family(fx.g, fx.a_set, fx.e_set.tagged(OPEN))
    assert any(np.array_equal(m.ids, fx.e_set.ids) for m in fam)


# ---------------------------------------------------------------------------
# boundary identity


def test_boundary_identity_exact_on_grid():
    fx = grid9()
    f = fx.a_set  # closed box of nine nodes
    assert f.openness == CLOSED
    cap_f, cap_rim, pasted = boundary_capacity_check(fx.g, f, fx.e_set, 2.0)
    assert abs(cap_f.value - cap_rim.value) <= 1e-8
    # the pasting puts the rim potential to 1 across all of F
    f_idx = fx.g.index_of(f.ids)
    assert np.all(pasted.values[f_idx] == 1.0)
    energy_v = p_energy(fx.g, min_upper_gradient(fx.g, pasted), 2.0)
    assert energy_v <= cap_rim.value + 1e-12


def test_boundary_identity_requires_closed_tag():
    fx = grid9()
    with pytest.raises(ValueError, match="closed"):
        boundary_capacity_check(fx.g, fx.a_set.tagged(UNKNOWN), fx.e_set, 2.0)


def test_boundary_of_closed_box_is_inner_rim():
    fx = grid9()
    rim = boundary(fx.g, fx.a_set)
    assert rim.issubset(fx.a_set)
    # a 3x3 block loses only its center
    assert len(rim) == len(fx.a_set) - 1


# ---------------------------------------------------------------------------
# ambient comparison


def test_ambient_monotone():
    fx = grid9()
    y2 = all_nodes(fx.g)
    y1 = fx.e_set  # cutting the rim edges can only lower the energy
    r1, r2 = ambient_comparison(fx.g, y1, y2, fx.a_set, fx.e_set, 2.0)
    assert r1.value <= r2.value + 1e-12
    assert r1.value < r2.value  # strict here: the rim carries energy


def test_ambient_validation():
    fx = grid9()
    with pytest.raises(ValueError, match="A <= E <= Y1 <= Y2"):
        ambient_comparison(fx.g, fx.a_set, all_nodes(fx.g), fx.a_set,
                           fx.e_set, 2.0)


# ---------------------------------------------------------------------------
# fixture-level checks


def test_radial_fixture_matches_oracle_exactly():
    fx = radial_condenser_path(1.0, 2.0, 32, 3.5, 3, weight=None)
    r = variational_capacity(fx.g, fx.a_set, fx.e_set, 3.5,
                             cfg=SolverConfig(p=3.5))
    assert r.value == pytest.approx(fx.params["oracle"], rel=1e-9)


def test_annulus_capacity_close_to_continuum():
    fx = annulus(1 / 16)
    r = variational_capacity(fx.g, fx.a_set, fx.e_set, 2.0)
    assert r.converged
    assert r.value == pytest.approx(2 * math.pi, rel=0.05)


def test_dense_disk_equality():
    fx = dense_disk(1 / 16)
    a_cut = fx.a_set.intersect(fx.e_set)
    r1 = variational_capacity(fx.g, fx.a_set, fx.e_set, 2.0)
    r2 = variational_capacity(fx.g, a_cut, fx.e_set, 2.0)
    assert abs(r1.value - r2.value) <= 1e-8
