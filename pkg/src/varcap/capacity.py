"""Condenser and Sobolev capacities on a discretized space.

``variational_capacity(g, A, E, p)`` minimizes the edge p-energy over
potentials that are 1 on ``A``, 0 outside ``E``, and free in between; the
reported value is the energy of the difference quotient of the minimizer
(recomputed without any solver smoothing).  ``sobolev_capacity`` drops the
zero-boundary constraint and adds the measure term.  ``tilde_capacity``
takes the infimum over a family of relatively open supersets, which is the
outer-regularized variant; on a finite space it can be ``inf`` only when
the supplied family is empty.

Closed-form oracles for series paths and radial condensers are provided
for validation; they are computed independently of the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .newtonian import DiscreteFunction, min_upper_gradient, p_energy
from .solver import SolveDiagnostics, SolverConfig, minimize_p_energy
from .space import (
    CLOSED,
    OPEN,
    MetricMeasureGraph,
    NodeSet,
    all_nodes,
    dilate,
    is_relatively_open,
    restrict_ambient,
)


@dataclass
class CapacityResult:
    """Outcome of one capacity computation.

    ``value`` is the p-energy of the extremal potential; ``potential`` is
    that potential (None for the empty-family inf sentinel).  ``flags``
    carries problem annotations such as ``A_touches_boundary``.
    """

    value: float
    potential: Optional[DiscreteFunction]
    diagnostics: SolveDiagnostics
    p: float
    space_hash: str
    a_set: NodeSet
    e_set: NodeSet
    flags: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.diagnostics.converged

    def to_json_dict(self, potential_file: Optional[str] = None) -> dict:
        doc = {
            "value": self.value,
            "converged": bool(self.diagnostics.converged),
            "iterations": int(self.diagnostics.iterations),
            "flags": {k: bool(v) for k, v in self.flags.items()},
        }
        if potential_file is not None:
            doc["potential_file"] = potential_file
        return doc


@dataclass
class OuterProfile:
    """Capacities of shrinking open dilations of a set."""

    eps: list
    values: list
    limit: float
    results: list

    def is_nonincreasing(self, slack: float = 1e-9) -> bool:
        return all(b <= a + slack * (1.0 + abs(a))
                   for a, b in zip(self.values, self.values[1:]))


def _trivial_diag() -> SolveDiagnostics:
    return SolveDiagnostics(0, 0.0, 0.0, [0.0], True)


def _inner_rim(g: MetricMeasureGraph, e_mask: np.ndarray) -> np.ndarray:
    rim = np.zeros(g.n_nodes, dtype=bool)
    cross_a = e_mask[g.edge_a] & ~e_mask[g.edge_b]
    cross_b = e_mask[g.edge_b] & ~e_mask[g.edge_a]
    rim[g.edge_a[cross_a]] = True
    rim[g.edge_b[cross_b]] = True
    return rim


def variational_capacity(
    g: MetricMeasureGraph,
    a_set: NodeSet,
    e_set: NodeSet,
    p: float,
    cfg: Optional[SolverConfig] = None,
) -> CapacityResult:
    """Condenser capacity of ``a_set`` relative to ``e_set``.

    The potential is pinned to 1 on ``a_set`` and to 0 on the complement
    of ``e_set``; the free values minimize the edge p-energy.  The final
    potential is clipped to [0, 1], which never increases the energy.
    """
    cfg = _with_p(cfg, p)
    if not g.has_ids(e_set.ids):
        raise ValueError("E references unknown node ids")
    if not a_set.issubset(e_set):
        raise ValueError("A must be contained in E")

    e_mask = np.zeros(g.n_nodes, dtype=bool)
    if len(e_set):
        e_mask[g.index_of(e_set.ids)] = True
    a_mask = np.zeros(g.n_nodes, dtype=bool)
    if len(a_set):
        a_mask[g.index_of(a_set.ids)] = True
    touches = bool(np.any(a_mask & _inner_rim(g, e_mask)))
    flags = {"A_touches_boundary": touches}

    if a_set.is_empty:
        pot = DiscreteFunction.constant(g, 0.0)
        return CapacityResult(0.0, pot, _trivial_diag(), p, g.space_hash,
                              a_set, e_set, flags)

    fixed = {int(i): 1.0 for i in a_set.ids}
    fixed.update((int(i), 0.0) for i in g.ids[~e_mask])
    free = NodeSet(g.ids[e_mask & ~a_mask], e_set.openness, "free region")
    u, diag = minimize_p_energy(g, fixed, free, cfg)
    u = DiscreteFunction(g, np.clip(u.values, 0.0, 1.0))
    value = p_energy(g, min_upper_gradient(g, u), p)
    return CapacityResult(value, u, diag, p, g.space_hash, a_set, e_set, flags)


def sobolev_capacity(
    g: MetricMeasureGraph,
    a_set: NodeSet,
    p: float,
    cfg: Optional[SolverConfig] = None,
) -> CapacityResult:
    """Measure-plus-energy capacity of ``a_set`` (no boundary pinning)."""
    cfg = _with_p(cfg, p)
    if not g.has_ids(a_set.ids):
        raise ValueError("A references unknown node ids")
    whole = all_nodes(g)
    if a_set.is_empty:
        pot = DiscreteFunction.constant(g, 0.0)
        return CapacityResult(0.0, pot, _trivial_diag(), p, g.space_hash,
                              a_set, whole, {})

    a_idx = g.index_of(a_set.ids)
    a_mask = np.zeros(g.n_nodes, dtype=bool)
    a_mask[a_idx] = True
    fixed = {int(i): 1.0 for i in a_set.ids}
    free = NodeSet(g.ids[~a_mask], whole.openness, "free region")
    u, diag = minimize_p_energy(g, fixed, free, cfg, mass=g.measures)
    u = DiscreteFunction(g, np.clip(u.values, 0.0, 1.0))
    value = float(np.dot(g.measures, np.abs(u.values) ** p)) \
        + p_energy(g, min_upper_gradient(g, u), p)
    return CapacityResult(value, u, diag, p, g.space_hash, a_set, whole, {})


def outer_capacity_profile(
    g: MetricMeasureGraph,
    a_set: NodeSet,
    e_set: NodeSet,
    p: float,
    eps_schedule: Sequence[float],
    cfg: Optional[SolverConfig] = None,
) -> OuterProfile:
    """Capacities of ``dilate(A, eps) inter E`` along a shrinking schedule."""
    eps = [float(x) for x in eps_schedule]
    if not eps:
        raise ValueError("eps schedule must be nonempty")
    if any(x <= 0 for x in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps schedule must be positive and strictly decreasing")
    if not a_set.issubset(e_set):
        raise ValueError("A must be contained in E")
    results = []
    for x in eps:
        blown = dilate(g, a_set, x).intersect(e_set).tagged(OPEN)
        results.append(variational_capacity(g, blown, e_set, p, cfg))
    values = [r.value for r in results]
    return OuterProfile(eps, values, values[-1], results)


def default_tilde_family(
    g: MetricMeasureGraph,
    a_set: NodeSet,
    e_set: NodeSet,
    eps_schedule: Optional[Sequence[float]] = None,
) -> List[NodeSet]:
    """Relatively open supersets of ``A`` inside ``E``: dilations cut to E,
    plus ``A`` and ``E`` themselves when their tags already certify them."""
    if eps_schedule is None:
        base = g.min_edge_length
        eps_schedule = [8.0 * base, 4.0 * base, 2.0 * base, 0.5 * base]
    fam = []
    for x in eps_schedule:
        fam.append(dilate(g, a_set, x).intersect(e_set).tagged(OPEN))
    if a_set.openness == OPEN or is_relatively_open(g, a_set, e_set):
        fam.append(a_set)
    if e_set.openness == OPEN:
        fam.append(e_set)
    return fam


def tilde_capacity(
    g: MetricMeasureGraph,
    a_set: NodeSet,
    e_set: NodeSet,
    p: float,
    family: Optional[Sequence[NodeSet]] = None,
    cfg: Optional[SolverConfig] = None,
) -> CapacityResult:
    """Infimum of condenser capacities over relatively open supersets.

    Every family member must satisfy ``A <= G <= E`` and be either tagged
    open (continuum provenance) or combinatorially relatively open in
    ``E``.  An empty family yields the ``inf`` sentinel: the infimum over
    nothing.
    """
    if family is None:
        family = default_tilde_family(g, a_set, e_set)
    family = list(family)
    if not a_set.issubset(e_set):
        raise ValueError("A must be contained in E")
    for member in family:
        if not (a_set.issubset(member) and member.issubset(e_set)):
            raise ValueError("family member violates A <= G <= E")
        if member.openness != OPEN and not is_relatively_open(g, member, e_set):
            raise ValueError("family member is not relatively open in E")
    if not family:
        return CapacityResult(math.inf, None, _trivial_diag(), p,
                              g.space_hash, a_set, e_set,
                              {"family_size": 0})
    results = [variational_capacity(g, member, e_set, p, cfg)
               for member in family]
    best = min(range(len(results)), key=lambda i: results[i].value)
    r = results[best]
    return CapacityResult(r.value, r.potential, r.diagnostics, p,
                          g.space_hash, a_set, e_set,
                          {"family_size": len(family),
                           "argmin_member": best,
                           **r.flags})


def boundary_capacity_check(
    g: MetricMeasureGraph,
    f_set: NodeSet,
    e_set: NodeSet,
    p: float,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[CapacityResult, CapacityResult, DiscreteFunction]:
    """Capacity of a closed set versus its inner boundary.

    For closed ``F`` the two condenser problems have the same value: any
    potential admissible for the boundary extends by the constant 1 across
    the rest of ``F`` without raising the energy.  Returns both results
    and the pasted witness potential.
    """
    if f_set.openness != CLOSED:
        raise ValueError("F must be tagged closed")
    if not f_set.issubset(e_set):
        raise ValueError("F must be contained in E")
    f_mask = np.zeros(g.n_nodes, dtype=bool)
    if len(f_set):
        f_mask[g.index_of(f_set.ids)] = True
    rim = NodeSet(g.ids[f_mask & _inner_rim(g, f_mask)], CLOSED, "boundary")
    cap_f = variational_capacity(g, f_set, e_set, p, cfg)
    cap_rim = variational_capacity(g, rim, e_set, p, cfg)
    pasted_vals = cap_rim.potential.values.copy() if cap_rim.potential is not None \
        else np.zeros(g.n_nodes)
    pasted_vals[f_mask] = 1.0
    pasted = DiscreteFunction(g, pasted_vals)
    return cap_f, cap_rim, pasted


def ambient_comparison(
    g: MetricMeasureGraph,
    y1: NodeSet,
    y2: NodeSet,
    a_set: NodeSet,
    e_set: NodeSet,
    p: float,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[CapacityResult, CapacityResult]:
    """The same condenser problem inside two nested ambient spaces.

    Requires ``A <= E <= Y1 <= Y2``.  Shrinking the ambient space can only
    remove pinned neighbors of ``E``, so the first value is at most the
    second.
    """
    if not (a_set.issubset(e_set) and e_set.issubset(y1)
            and y1.issubset(y2)):
        raise ValueError("need A <= E <= Y1 <= Y2")
    g1 = restrict_ambient(g, y1)
    g2 = restrict_ambient(g, y2)
    return (variational_capacity(g1, a_set, e_set, p, cfg),
            variational_capacity(g2, a_set, e_set, p, cfg))


def _with_p(cfg: Optional[SolverConfig], p: float) -> SolverConfig:
    if not (p >= 1):
        raise ValueError("exponent p must be >= 1")
    if cfg is None:
        return SolverConfig(p=p)
    from dataclasses import replace

    return replace(cfg, p=p)


# ---------------------------------------------------------------------------
# closed-form oracles (independent of the solver machinery)

def path_capacity_oracle(weights: Sequence[float], p: float) -> float:
    """Series formula for a unit-length edge path pinned 1 at one end and
    0 at the other: ``(sum_i w_i^(-1/(p-1)))^(1-p)``."""
    w = np.asarray(list(weights), dtype=float)
    if w.size == 0:
        raise ValueError("need at least one edge weight")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("edge weights must be positive and finite")
    if not (p > 1):
        raise ValueError("the series formula needs p > 1")
    return float(np.sum(w ** (-1.0 / (p - 1.0))) ** (1.0 - p))


def sphere_surface_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2*pi for n=2, 4*pi for n=3)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return float(2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0))


def radial_condenser_oracle(
    r: float,
    big_r: float,
    p: float,
    n: int,
    weight=None,
) -> float:
    """Capacity of the spherical condenser with radial weight ``w(s)``.

    Value: ``(int_r^R (omega * s^(n-1) * w(s))^(-1/(p-1)) ds)^(1-p)``
    where ``omega`` is the unit-sphere surface area in dimension ``n``.
    The quadrature is carried to 1e-12 relative accuracy.  A quadrature
    that cannot certify a finite value (a weight violating positivity on
    the interval) yields the ``inf`` sentinel.
    """
    if not (0 < r < big_r):
        raise ValueError("need 0 < r < R")
    if not (p > 1):
        raise ValueError("the radial formula needs p > 1")
    omega = sphere_surface_area(n)
    if weight is None:
        wfun = lambda s: 1.0
    elif callable(weight):
        wfun = weight
    else:
        from .space import as_weight

        vec = as_weight(weight)
        wfun = lambda s: float(vec(np.array([[s]]))[0])

    expo = -1.0 / (p - 1.0)

    def integrand(s):
        w = wfun(s)
        if not (w > 0):
            raise ValueError("weight must be positive on [r, R]")
        return (omega * s ** (n - 1) * w) ** expo

    try:
        total, _ = integrate.quad(integrand, r, big_r, epsabs=0,
                                  epsrel=1e-12, limit=400)
    except ValueError:
        return math.inf
    if not math.isfinite(total):
        return math.inf
    if total <= 0.0:
        return math.inf
    return float(total ** (1.0 - p))
