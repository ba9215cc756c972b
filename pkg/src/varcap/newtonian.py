"""Discrete Newtonian calculus: functions on nodes and their upper gradients.

A real-valued node function ``u`` has, on each edge ``{x, y}``, the
difference quotient ``|u(x) - u(y)| / length``.  That edge function is the
least candidate compatible with the upper-gradient inequality along every
edge path, so it plays the role of the minimal upper gradient here.  The
associated energy with exponent ``p`` is ``sum_e w_e * grad_e^p`` and the
Sobolev-norm functional adds the measure term ``sum_x mu_x |u(x)|^p``
(both returned as p-th powers, not roots).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from . import kernels
from .space import MetricMeasureGraph


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Node-indexed values on a fixed space, aligned with node order."""

    graph: MetricMeasureGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != (self.graph.n_nodes,):
            raise ValueError("values must align with the node array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, DiscreteFunction):
            return NotImplemented
        return self.graph is other.graph and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        return hash((id(self.graph), self.values.tobytes()))

    def to_list(self):
        return [float(v) for v in self.values]

    @classmethod
    def constant(cls, g: MetricMeasureGraph, c: float) -> "DiscreteFunction":
        return cls(g, np.full(g.n_nodes, float(c)))


@dataclass(frozen=True, eq=False)
class EdgeFunction:
    """Nonnegative edge-indexed values on a fixed space."""

    graph: MetricMeasureGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != (self.graph.n_edges,):
            raise ValueError("values must align with the edge array")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("edge function values must be finite and >= 0")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def to_list(self):
        return [float(v) for v in self.values]


def _same_graph(a, b):
    if a.graph is not b.graph and a.graph.space_hash != b.graph.space_hash:
        raise ValueError("operands live on different spaces")


def min_upper_gradient(g: MetricMeasureGraph, u: DiscreteFunction) -> EdgeFunction:
    """Edgewise difference quotient ``|u(x) - u(y)| / length``."""
    if u.graph is not g and u.graph.space_hash != g.space_hash:
        raise ValueError("function does not live on this space")
    if g.n_edges == 0:
        return EdgeFunction(g, np.empty(0))
    inv_len = 1.0 / g.lengths
    vals = kernels.edge_gradients(u.values, g.edge_a, g.edge_b, inv_len)
    return EdgeFunction(g, vals)


def p_energy(g: MetricMeasureGraph, grad: EdgeFunction, p: float) -> float:
    """Weighted edge energy ``sum_e w_e * grad_e^p``."""
    if not (p >= 1):
        raise ValueError("exponent p must be >= 1")
    _same_graph(grad, grad)
    if grad.graph is not g and grad.graph.space_hash != g.space_hash:
        raise ValueError("edge function does not live on this space")
    if g.n_edges == 0:
        return 0.0
    return kernels.weighted_power_sum(g.eweights, grad.values, p)


def sobolev_norm_p(g: MetricMeasureGraph, u: DiscreteFunction, p: float) -> float:
    """p-th power of the Sobolev norm: measure term plus gradient energy."""
    if not (p >= 1):
        raise ValueError("exponent p must be >= 1")
    mass = float(np.dot(g.measures, np.abs(u.values) ** p))
    return mass + p_energy(g, min_upper_gradient(g, u), p)


def lattice_max(u: DiscreteFunction, v: DiscreteFunction) -> DiscreteFunction:
    _same_graph(u, v)
    return DiscreteFunction(u.graph, np.maximum(u.values, v.values))


def lattice_min(u: DiscreteFunction, v: DiscreteFunction) -> DiscreteFunction:
    _same_graph(u, v)
    return DiscreteFunction(u.graph, np.minimum(u.values, v.values))


def truncate(u: DiscreteFunction, c: float) -> DiscreteFunction:
    """Pointwise ``min(u, c)``."""
    return DiscreteFunction(u.graph, np.minimum(u.values, float(c)))


def pointwise_dilation(g: MetricMeasureGraph, u: DiscreteFunction) -> DiscreteFunction:
    """Nodewise max of the difference quotients over incident edges.

    Isolated nodes get 0.  This is the discrete stand-in for the pointwise
    dilation (local Lipschitz) functional; it always dominates nothing
    smaller than the edgewise gradient it is built from.
    """
    grad = min_upper_gradient(g, u).values
    out = np.zeros(g.n_nodes)
    if g.n_edges:
        np.maximum.at(out, g.edge_a, grad)
        np.maximum.at(out, g.edge_b, grad)
    return DiscreteFunction(g, out)


def verify_upper_gradient(
    g: MetricMeasureGraph,
    u: DiscreteFunction,
    candidate: EdgeFunction,
    paths: Iterable[Sequence[int]],
    slack: float = 1e-12,
) -> Tuple[bool, float]:
    """Check ``|u(start) - u(end)| <= sum candidate * length`` along paths.

    ``paths`` are sequences of node ids with consecutive nodes adjacent.
    Returns ``(ok, worst)`` where ``worst`` is the largest violation margin
    (positive means the inequality failed by that much).
    """
    lut = g.edge_lookup()
    worst = -np.inf
    checked = False
    for path in paths:
        nodes = list(path)
        if len(nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        idx = g.index_of(np.asarray(nodes, dtype=np.int64))
        total = 0.0
        for a, b in zip(idx, idx[1:]):
            key = (int(min(a, b)), int(max(a, b)))
            if key not in lut:
                raise ValueError(f"path nodes {key} are not adjacent")
            e = lut[key]
            total += candidate.values[e] * g.lengths[e]
        gap = abs(u.values[idx[0]] - u.values[idx[-1]]) - total
        worst = max(worst, gap)
        checked = True
    if not checked:
        raise ValueError("no paths supplied")
    return (worst <= slack), float(worst)


def sample_paths(g: MetricMeasureGraph, rng: np.random.Generator,
                 n_paths: int = 20, max_len: int = 12) -> list:
    """Random non-backtracking edge paths, as lists of node ids."""
    paths = []
    for _ in range(n_paths):
        cur = int(rng.integers(g.n_nodes))
        prev = -1
        path = [int(g.ids[cur])]
        for _ in range(int(rng.integers(1, max_len + 1))):
            nbrs = g.neighbors(cur)
            if len(nbrs) > 1:
                nbrs = nbrs[nbrs != prev]
            if len(nbrs) == 0:
                break
            nxt = int(nbrs[rng.integers(len(nbrs))])
            path.append(int(g.ids[nxt]))
            prev, cur = cur, nxt
        if len(path) >= 2:
            paths.append(path)
    return paths
