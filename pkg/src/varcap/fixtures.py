"""Canonical test geometries: grids, condensers, and reduction paths.

Each builder returns a :class:`CondenserFixture` bundling a space with its
canonical pinned set ``A`` and domain ``E``; extra sets and reference
values live in ``params``.  These are plain constructions, kept in the
package so the command line and the property suites share one registry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .capacity import radial_condenser_oracle, sphere_surface_area
from .space import (
    CLOSED,
    UNKNOWN,
    Ball,
    Box,
    Halfspace,
    MetricMeasureGraph,
    NodeSet,
    SetOp,
    as_weight,
    build_graph,
    build_grid,
    resolve_set,
)


@dataclass(frozen=True)
class CondenserFixture:
    name: str
    g: MetricMeasureGraph
    a_set: NodeSet
    e_set: NodeSet
    params: dict = field(default_factory=dict)


def node_at(g: MetricMeasureGraph, point) -> NodeSet:
    """The node sitting exactly at ``point`` (1e-8 snap), as a closed set."""
    if not g.has_positions:
        raise ValueError("the space carries no positions")
    d = np.linalg.norm(g.positions - np.asarray(point, dtype=float), axis=1)
    i = int(np.argmin(d))
    if d[i] > 1e-8:
        raise ValueError(f"no node at {tuple(point)}; nearest is {d[i]:.3g} away")
    return NodeSet(np.array([g.ids[i]], dtype=np.int64), CLOSED, "point")


def path_fixture(weights, lengths=None) -> CondenserFixture:
    """Series path: node 0 pinned to 1, the far end pinned to 0."""
    w = np.asarray(list(weights), dtype=float)
    if w.size == 0:
        raise ValueError("need at least one edge")
    ell = np.ones_like(w) if lengths is None else np.asarray(list(lengths), dtype=float)
    xs = np.concatenate([[0.0], np.cumsum(ell)])
    nodes = [(i, 1.0, [float(xs[i])]) for i in range(w.size + 1)]
    edges = [(i, i + 1, float(ell[i]), float(w[i])) for i in range(w.size)]
    g = build_graph(nodes, edges)
    a = NodeSet.from_ids([0], CLOSED, "path head")
    e = NodeSet.from_ids(range(w.size), UNKNOWN, "all but the far end")
    return CondenserFixture("path", g, a, e, {"weights": w.tolist()})


def pinned_path(n_free: int) -> CondenserFixture:
    """Unit path with ``n_free`` interior nodes between two pinned ends."""
    if n_free < 1:
        raise ValueError("need at least one interior node")
    n = n_free + 2
    nodes = [(i, 1.0, [float(i)]) for i in range(n)]
    edges = [(i, i + 1, 1.0, 1.0) for i in range(n - 1)]
    g = build_graph(nodes, edges)
    e = NodeSet.from_ids(range(1, n - 1), UNKNOWN, "interior")
    a = NodeSet.from_ids([1], CLOSED, "first interior node")
    return CondenserFixture("pinned-path", g, a, e, {})


def grid9() -> CondenserFixture:
    """9x9 unit-square lattice; E is the inner 7x7 block, A the center 3x3."""
    h = 0.125
    g = build_grid(Box((0.0, 0.0), (1.0, 1.0)), h)
    e = resolve_set(g, Box((0.125, 0.125), (0.875, 0.875)))
    a = resolve_set(g, Box((0.375, 0.375), (0.625, 0.625)))
    return CondenserFixture("grid9", g, a, e, {"h": h, "p": 2.0})


def inner7(g: MetricMeasureGraph) -> NodeSet:
    return resolve_set(g, Box((0.125, 0.125), (0.875, 0.875)))


def annulus(h: float = 0.0625, r: float = 1.0, big_r: float = math.e) -> CondenserFixture:
    """Planar ring condenser: A = closed disk of radius ``r``, E = open disk
    of radius ``big_r``, lattice padded 2.5h past both rims so the pinned
    layers exist."""
    if not (0 < r < big_r):
        raise ValueError("need 0 < r < R")
    pad = 2.5 * h
    outer = Ball((0.0, 0.0), big_r + pad, open=False)
    hole = Ball((0.0, 0.0), max(r - pad, 0.0), open=True)
    g = build_grid(SetOp("diff", (outer, hole)), h)
    a = resolve_set(g, Ball((0.0, 0.0), r, open=False))
    e = resolve_set(g, Ball((0.0, 0.0), big_r))
    upper = resolve_set(g, Halfspace((0.0, -1.0), 0.0, open=False))
    return CondenserFixture(
        "annulus", g, a, e,
        {"h": h, "r": r, "R": big_r, "p": 2.0,
         "oracle": 2.0 * math.pi / math.log(big_r / r),
         "half_set": upper})


def radial_condenser_path(
    r: float,
    big_r: float,
    num_edges: int,
    p: float,
    n: int,
    weight=None,
) -> CondenserFixture:
    """1-D reduction of the radial condenser with subinterval-exact weights.

    Each edge's energy weight is chosen so the edge alone reproduces the
    condenser value of its radial subinterval; series composition then
    makes the whole path's capacity equal the continuum value for any
    partition.  Solver output against this fixture measures optimization
    error only.
    """
    if num_edges < 1:
        raise ValueError("need at least one edge")
    if not (0 < r < big_r):
        raise ValueError("need 0 < r < R")
    if not (p > 1):
        raise ValueError("the radial reduction needs p > 1")
    s = np.linspace(r, big_r, num_edges + 1)
    omega = sphere_surface_area(n)
    if weight is None:
        wfun = lambda t: 1.0
    elif callable(weight):
        wfun = weight
    else:
        vec = as_weight(weight)
        wfun = lambda t: float(vec(np.array([[t]]))[0])
    expo = -1.0 / (p - 1.0)
    integrand = lambda t: (omega * t ** (n - 1) * wfun(t)) ** expo

    lengths = np.diff(s)
    kappa = np.empty(num_edges)
    for i in range(num_edges):
        part, _ = integrate.quad(integrand, s[i], s[i + 1], epsabs=0,
                                 epsrel=1e-12, limit=200)
        kappa[i] = part ** (1.0 - p)
    eweights = kappa * lengths ** p

    cells = np.empty(num_edges + 1)
    cells[0] = lengths[0] / 2
    cells[-1] = lengths[-1] / 2
    cells[1:-1] = (lengths[:-1] + lengths[1:]) / 2
    nodes = [(i, float(cells[i]), [float(s[i])]) for i in range(num_edges + 1)]
    edges = [(i, i + 1, float(lengths[i]), float(eweights[i]))
             for i in range(num_edges)]
    g = build_graph(nodes, edges)
    a = NodeSet.from_ids([0], CLOSED, "inner rim")
    e = NodeSet.from_ids(range(num_edges), UNKNOWN, "all but outer rim")
    return CondenserFixture(
        "radial-path", g, a, e,
        {"r": r, "R": big_r, "p": p, "n": n,
         "oracle": radial_condenser_oracle(r, big_r, p, n, weight)})


def closed_square(h: float = 0.125) -> CondenserFixture:
    """Closed rectangle E = [-1,1]x[0,1] inside a larger grid, with A the
    single node at the origin (a boundary point of E)."""
    g = build_grid(Box((-1.5, -0.5), (1.5, 1.5)), h)
    e = resolve_set(g, Box((-1.0, 0.0), (1.0, 1.0)))
    a = node_at(g, (0.0, 0.0))
    return CondenserFixture("closed-square", g, a, e, {"h": h, "p": 1.5})


def bowtie(h: float = 0.125) -> CondenserFixture:
    """Two closed squares joined only at the origin (the quadrant condition
    xy >= 0 on [-2,2]^2).  ``e_set`` is the half-open square E1 = [0,1)^2;
    ``params["e2_set"]`` adds the closed wedge x <= y <= 0 of the opposite
    block."""
    q1 = Box((0.0, 0.0), (2.0, 2.0))
    q3 = Box((-2.0, -2.0), (0.0, 0.0))
    g = build_grid(SetOp("union", (q1, q3)), h)
    a = node_at(g, (0.0, 0.0))
    e1 = resolve_set(g, Box((0.0, 0.0), (1.0, 1.0),
                            open_lo=(False, False), open_hi=(True, True)))
    wedge = SetOp("inter", (q3, Halfspace((1.0, -1.0), 0.0, open=False)))
    e2 = e1.union(resolve_set(g, wedge))
    return CondenserFixture("bowtie", g, a, e1,
                            {"h": h, "p": 1.5, "e2_set": e2})


def boundary_reach(h: float = 0.0625) -> CondenserFixture:
    """Open rectangle E = (-1,1)x(0,1) with the open wedge A = {|x|<y<1/2},
    whose closure touches the boundary of E at the origin."""
    g = build_grid(Box((-1.25, -0.25), (1.25, 1.25)), h)
    e = resolve_set(g, Box((-1.0, 0.0), (1.0, 1.0),
                           open_lo=(True, True), open_hi=(True, True)))
    wedge = SetOp("inter", (
        Halfspace((1.0, -1.0), 0.0),
        Halfspace((-1.0, -1.0), 0.0),
        Halfspace((0.0, 1.0), 0.5),
    ))
    a = resolve_set(g, wedge).intersect(e)
    return CondenserFixture("boundary-reach", g, a, e, {"h": h, "p": 1.5})


def dense_disk(h: float = 0.0625) -> CondenserFixture:
    """Open unit disk with a countable dense set removed; at lattice scale
    the removed set samples to nothing, so E is the disk itself and the
    comparison capacity (against the unpunctured disk) is an identity.
    ``params["note"]`` records the modeling choice."""
    g = build_grid(Box((-1.25, -1.25), (1.25, 1.25)), h)
    ball = Ball((0.0, 0.0), 1.0)
    e = resolve_set(g, ball)
    a = resolve_set(g, Ball((0.0, 0.0), 0.25, open=False))
    return CondenserFixture(
        "dense-disk", g, a, e,
        {"h": h, "p": 1.5, "ball_set": resolve_set(g, ball),
         "note": "countable dense removal set is capacity-null and "
                 "invisible at lattice scale; modeled as empty"})


FIXTURE_BUILDERS = {
    "grid9": lambda h=0.125: grid9(),
    "annulus": annulus,
    "closed-square": closed_square,
    "bowtie": bowtie,
    "boundary-reach": boundary_reach,
    "dense-disk": dense_disk,
    "path": lambda h=None: path_fixture([1.0, 2.0, 0.5, 4.0]),
    "radial-path": lambda h=None: radial_condenser_path(1.0, 2.0, 16, 3.5, 2,
                                                        {"radial_power": 2}),
}


def build_fixture(name: str, h: float = None) -> CondenserFixture:
    if name not in FIXTURE_BUILDERS:
        raise ValueError(f"unknown fixture {name!r}; "
                         f"choices: {sorted(FIXTURE_BUILDERS)}")
    builder = FIXTURE_BUILDERS[name]
    return builder() if h is None else builder(h)


def profile_fixtures() -> list:
    """The set exercised by the outer-profile exactness sweep."""
    return [
        grid9(),
        annulus(1 / 16),
        closed_square(1 / 8),
        bowtie(1 / 8),
        boundary_reach(1 / 16),
        path_fixture([1.0, 2.0, 0.5, 4.0]),
    ]
