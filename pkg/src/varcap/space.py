"""Discretized metric measure spaces.

A space is a finite weighted graph.  Nodes carry strictly positive
measures and, optionally, positions in ``R^d``; edges carry strictly
positive lengths and energy weights.  Grid spaces are produced by
rasterizing a geometric predicate on an axis-aligned lattice.

Because every subset of a finite graph is clopen in the graph topology,
node sets additionally track *provenance*: sets resolved from an open
(resp. closed) continuum predicate are tagged ``open`` (resp. ``closed``),
explicit node lists are tagged ``unknown``.  The tag is what downstream
operations consult when the open/closed distinction matters.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

OPEN = "open"
CLOSED = "closed"
UNKNOWN = "unknown"
_FLAGS = (OPEN, CLOSED, UNKNOWN)

_FUZZ = 1e-12


# ---------------------------------------------------------------------------
# geometric predicates

def _as_vec(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-d coordinate vector")
    return v


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float
    open: bool = True

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center)
        d = np.linalg.norm(pts - c, axis=1)
        if self.open:
            return d < self.radius
        return d <= self.radius + _FUZZ * (1.0 + self.radius)

    def openness(self) -> str:
        return OPEN if self.open else CLOSED

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple
    open_lo: tuple = ()
    open_hi: tuple = ()

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        if len(lo) != len(hi):
            raise ValueError("box lo/hi dimension mismatch")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("box lo exceeds hi")
        olo = self.open_lo if self.open_lo else (False,) * len(lo)
        ohi = self.open_hi if self.open_hi else (False,) * len(lo)
        if len(olo) != len(lo) or len(ohi) != len(lo):
            raise ValueError("box openness arrays must match dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "open_lo", tuple(bool(b) for b in olo))
        object.__setattr__(self, "open_hi", tuple(bool(b) for b in ohi))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        mask = np.ones(len(pts), dtype=bool)
        for ax, (a, b, oa, ob) in enumerate(
            zip(self.lo, self.hi, self.open_lo, self.open_hi)
        ):
            x = pts[:, ax]
            mask &= (x > a) if oa else (x >= a - _FUZZ * (1.0 + abs(a)))
            mask &= (x < b) if ob else (x <= b + _FUZZ * (1.0 + abs(b)))
        return mask

    def openness(self) -> str:
        flags = self.open_lo + self.open_hi
        if all(flags):
            return OPEN
        if not any(flags):
            return CLOSED
        return UNKNOWN

    def bounds(self):
        return np.asarray(self.lo), np.asarray(self.hi)


@dataclass(frozen=True)
class Halfspace:
    """Points with ``normal . x < offset`` (open) or ``<= offset`` (closed)."""

    normal: tuple
    offset: float
    open: bool = True

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(c) for c in self.normal))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        s = pts @ np.asarray(self.normal)
        if self.open:
            return s < self.offset
        return s <= self.offset + _FUZZ * (1.0 + abs(self.offset))

    def openness(self) -> str:
        return OPEN if self.open else CLOSED

    def bounds(self):
        return None


@dataclass(frozen=True)
class ListSet:
    ids: tuple

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))

    def contains(self, pts):
        raise ValueError("an explicit node list is not a geometric predicate")

    def openness(self) -> str:
        return UNKNOWN

    def bounds(self):
        return None


@dataclass(frozen=True)
class SetOp:
    kind: str  # union | inter | diff
    parts: tuple

    def __post_init__(self):
        if self.kind not in ("union", "inter", "diff"):
            raise ValueError(f"unknown set operation {self.kind!r}")
        if self.kind == "diff" and len(self.parts) != 2:
            raise ValueError("diff takes exactly two operands")
        if not self.parts:
            raise ValueError("set operation needs at least one operand")
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        masks = [p.contains(pts) for p in self.parts]
        if self.kind == "union":
            out = masks[0]
            for m in masks[1:]:
                out = out | m
            return out
        if self.kind == "inter":
            out = masks[0]
            for m in masks[1:]:
                out = out & m
            return out
        return masks[0] & ~masks[1]

    def openness(self) -> str:
        return combine_openness(self.kind, [p.openness() for p in self.parts])

    def bounds(self):
        bs = [p.bounds() for p in self.parts]
        if self.kind == "union":
            if any(b is None for b in bs):
                return None
            lo = np.min([b[0] for b in bs], axis=0)
            hi = np.max([b[1] for b in bs], axis=0)
            return lo, hi
        if self.kind == "inter":
            finite = [b for b in bs if b is not None]
            if not finite:
                return None
            lo = np.max([b[0] for b in finite], axis=0)
            hi = np.min([b[1] for b in finite], axis=0)
            return lo, np.maximum(lo, hi)
        return bs[0]


Predicate = Union[Ball, Box, Halfspace, ListSet, SetOp]


def combine_openness(kind: str, flags: Sequence[str]) -> str:
    """Openness tag of a union/intersection/difference of tagged sets."""
    if kind in ("union", "inter"):
        if all(f == OPEN for f in flags):
            return OPEN
        if all(f == CLOSED for f in flags):
            return CLOSED
        return UNKNOWN
    a, b = flags
    if a == OPEN and b == CLOSED:
        return OPEN
    if a == CLOSED and b == OPEN:
        return CLOSED
    return UNKNOWN


def parse_predicate(spec) -> Predicate:
    """Parse a JSON-style predicate tree.

    Leaves: ``{"ball": {"center": [...], "r": r}, "open": bool}``,
    ``{"box": {"lo": [...], "hi": [...]}, "open": bool}`` (per-face control
    via ``open_lo``/``open_hi``), ``{"halfspace": {"normal": [...],
    "offset": c}, "open": bool}``, ``{"list": [ids...]}``.  Internal nodes:
    ``{"union": [...]}, {"inter": [...]}, {"diff": [a, b]}``.
    """
    if isinstance(spec, (Ball, Box, Halfspace, ListSet, SetOp)):
        return spec
    if not isinstance(spec, dict):
        raise ValueError("set spec must be a JSON object")
    if "ball" in spec:
        b = spec["ball"]
        return Ball(tuple(b["center"]), float(b["r"]), bool(spec.get("open", True)))
    if "box" in spec:
        b = spec["box"]
        n = len(b["lo"])
        default = bool(spec.get("open", False))
        olo = spec.get("open_lo", [default] * n)
        ohi = spec.get("open_hi", [default] * n)
        return Box(tuple(b["lo"]), tuple(b["hi"]), tuple(olo), tuple(ohi))
    if "halfspace" in spec:
        hs = spec["halfspace"]
        return Halfspace(
            tuple(hs["normal"]), float(hs["offset"]), bool(spec.get("open", True))
        )
    if "list" in spec:
        return ListSet(tuple(spec["list"]))
    for kind in ("union", "inter", "diff"):
        if kind in spec:
            return SetOp(kind, tuple(parse_predicate(s) for s in spec[kind]))
    raise ValueError(f"unrecognized set spec keys: {sorted(spec)}")


# ---------------------------------------------------------------------------
# scalar weight fields

WeightSpec = Union[None, float, int, dict, Callable[[np.ndarray], np.ndarray]]


def as_weight(spec: WeightSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a weight spec into a vectorized field ``pts -> values``.

    Accepts a constant, ``{"const": c}``, ``{"radial_power": a}`` for
    ``w(x) = |x|^a``, or any callable on ``(k, d)`` position arrays.
    """
    if spec is None:
        return lambda pts: np.ones(len(pts))
    if isinstance(spec, (int, float)):
        c = float(spec)
        return lambda pts: np.full(len(pts), c)
    if isinstance(spec, dict):
        if "const" in spec:
            c = float(spec["const"])
            return lambda pts: np.full(len(pts), c)
        if "radial_power" in spec:
            a = float(spec["radial_power"])
            return lambda pts: np.linalg.norm(pts, axis=1) ** a
        raise ValueError(f"unrecognized weight spec keys: {sorted(spec)}")
    if callable(spec):
        return spec
    raise ValueError("weight spec must be a constant, dict, or callable")


# ---------------------------------------------------------------------------
# the graph

class MetricMeasureGraph:
    """Immutable weighted graph with node measures and optional positions.

    Parameters
    ----------
    ids : array_like of int
        Node identifiers, unique, in presentation order.
    measures : array_like of float
        Strictly positive node measures, aligned with ``ids``.
    positions : array_like of shape (n, d), optional
        Node coordinates.  When present, edge lengths must agree with the
        Euclidean endpoint distance to 1e-12 relative accuracy.
    edge_a, edge_b : array_like of int
        Edge endpoints as *indices* into the node arrays.
    lengths, eweights : array_like of float
        Strictly positive edge lengths and energy weights.
    mesh_size, dimension_hint : optional grid metadata.
    """

    def __init__(self, ids, measures, positions, edge_a, edge_b, lengths,
                 eweights, mesh_size=None, dimension_hint=None):
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        measures = np.ascontiguousarray(measures, dtype=float)
        edge_a = np.ascontiguousarray(edge_a, dtype=np.int64)
        edge_b = np.ascontiguousarray(edge_b, dtype=np.int64)
        lengths = np.ascontiguousarray(lengths, dtype=float)
        eweights = np.ascontiguousarray(eweights, dtype=float)

        n = ids.shape[0]
        if n == 0:
            raise ValueError("a space needs at least one node")
        if np.unique(ids).shape[0] != n:
            raise ValueError("node ids must be unique")
        if measures.shape != (n,):
            raise ValueError("measures must align with ids")
        if not np.all(np.isfinite(measures)) or np.any(measures <= 0):
            raise ValueError("node measures must be finite and positive")

        if positions is not None:
            positions = np.ascontiguousarray(positions, dtype=float)
            if positions.ndim != 2 or positions.shape[0] != n:
                raise ValueError("positions must be an (n, d) array")
            if not np.all(np.isfinite(positions)):
                raise ValueError("positions must be finite")

        m = edge_a.shape[0]
        for arr, name in ((edge_b, "edge endpoints"), (lengths, "lengths"),
                          (eweights, "edge weights")):
            if arr.shape != (m,):
                raise ValueError(f"{name} must align with edge_a")
        if m:
            if edge_a.min(initial=0) < 0 or edge_b.min(initial=0) < 0 \
                    or edge_a.max(initial=-1) >= n or edge_b.max(initial=-1) >= n:
                raise ValueError("edge endpoint index out of range")
            if np.any(edge_a == edge_b):
                raise ValueError("self-loops are not allowed")
            if not np.all(np.isfinite(lengths)) or np.any(lengths <= 0):
                raise ValueError("edge lengths must be finite and positive")
            if not np.all(np.isfinite(eweights)) or np.any(eweights <= 0):
                raise ValueError("edge weights must be finite and positive")
            lo = np.minimum(edge_a, edge_b)
            hi = np.maximum(edge_a, edge_b)
            key = lo * n + hi
            if np.unique(key).shape[0] != m:
                raise ValueError("duplicate undirected edge")
            edge_a, edge_b = lo, hi
            if positions is not None:
                d = np.linalg.norm(positions[edge_a] - positions[edge_b], axis=1)
                tol = 1e-12 * np.maximum(1.0, np.maximum(d, lengths))
                if np.any(np.abs(d - lengths) > tol):
                    raise ValueError("edge length disagrees with positions")

        self._ids = ids
        self._measures = measures
        self._positions = positions
        self._ea = edge_a
        self._eb = edge_b
        self._lengths = lengths
        self._eweights = eweights
        self.mesh_size = None if mesh_size is None else float(mesh_size)
        self.dimension_hint = None if dimension_hint is None else int(dimension_hint)

        for arr in (ids, measures, edge_a, edge_b, lengths, eweights):
            arr.setflags(write=False)
        if positions is not None:
            positions.setflags(write=False)

        order = np.argsort(ids, kind="stable")
        self._ids_sorted = ids[order]
        self._ids_order = order
        self._cache: dict = {}

    # -- basic accessors ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self._ids.shape[0]

    @property
    def n_edges(self) -> int:
        return self._ea.shape[0]

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def measures(self) -> np.ndarray:
        return self._measures

    @property
    def positions(self) -> Optional[np.ndarray]:
        return self._positions

    @property
    def has_positions(self) -> bool:
        return self._positions is not None

    @property
    def edge_a(self) -> np.ndarray:
        return self._ea

    @property
    def edge_b(self) -> np.ndarray:
        return self._eb

    @property
    def lengths(self) -> np.ndarray:
        return self._lengths

    @property
    def eweights(self) -> np.ndarray:
        return self._eweights

    @property
    def min_edge_length(self) -> float:
        return float(self._lengths.min()) if self.n_edges else math.inf

    @property
    def total_measure(self) -> float:
        return float(self._measures.sum())

    def index_of(self, ids) -> np.ndarray:
        """Map node ids to indices; raises on unknown ids."""
        q = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        pos = np.searchsorted(self._ids_sorted, q)
        pos = np.clip(pos, 0, self.n_nodes - 1)
        bad = self._ids_sorted[pos] != q
        if np.any(bad):
            raise ValueError(f"unknown node id(s): {q[bad][:5].tolist()}")
        return self._ids_order[pos]

    def has_ids(self, ids) -> bool:
        q = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        pos = np.searchsorted(self._ids_sorted, q)
        pos = np.clip(pos, 0, self.n_nodes - 1)
        return bool(np.all(self._ids_sorted[pos] == q))

    # -- cached structure ---------------------------------------------------

    def _neighbor_csr(self):
        if "nbr" not in self._cache:
            n, m = self.n_nodes, self.n_edges
            rows = np.concatenate([self._ea, self._eb])
            cols = np.concatenate([self._eb, self._ea])
            eids = np.tile(np.arange(m, dtype=np.int64), 2)
            order = np.argsort(rows, kind="stable")
            rows, cols, eids = rows[order], cols[order], eids[order]
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr, rows + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._cache["nbr"] = (indptr, cols, eids)
        return self._cache["nbr"]

    def neighbors(self, idx: int) -> np.ndarray:
        indptr, cols, _ = self._neighbor_csr()
        return cols[indptr[idx]:indptr[idx + 1]]

    def incident_edges(self, idx: int) -> np.ndarray:
        indptr, _, eids = self._neighbor_csr()
        return eids[indptr[idx]:indptr[idx + 1]]

    def length_matrix(self) -> csr_matrix:
        if "lenmat" not in self._cache:
            n = self.n_nodes
            rows = np.concatenate([self._ea, self._eb])
            cols = np.concatenate([self._eb, self._ea])
            data = np.concatenate([self._lengths, self._lengths])
            self._cache["lenmat"] = csr_matrix((data, (rows, cols)), shape=(n, n))
        return self._cache["lenmat"]

    def component_labels(self) -> np.ndarray:
        if "comp" not in self._cache:
            _, labels = csgraph.connected_components(
                self.length_matrix(), directed=False
            )
            self._cache["comp"] = labels
        return self._cache["comp"]

    def edge_lookup(self) -> dict:
        """Map of canonical index pairs ``(a, b), a < b`` to edge ids."""
        if "elut" not in self._cache:
            self._cache["elut"] = {
                (int(a), int(b)): e
                for e, (a, b) in enumerate(zip(self._ea, self._eb))
            }
        return self._cache["elut"]

    @property
    def space_hash(self) -> str:
        if "hash" not in self._cache:
            hsh = hashlib.sha256()
            for arr in (self._ids, self._measures, self._ea, self._eb,
                        self._lengths, self._eweights):
                hsh.update(arr.tobytes())
            if self._positions is not None:
                hsh.update(np.asarray(self._positions.shape).tobytes())
                hsh.update(self._positions.tobytes())
            meta = f"{self.mesh_size}|{self.dimension_hint}"
            hsh.update(meta.encode())
            self._cache["hash"] = hsh.hexdigest()
        return self._cache["hash"]

    def __repr__(self):
        return (f"MetricMeasureGraph(n_nodes={self.n_nodes}, "
                f"n_edges={self.n_edges}, positions={self.has_positions})")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            rec = {"id": int(self._ids[i]), "measure": float(self._measures[i])}
            if self._positions is not None:
                rec["pos"] = [float(x) for x in self._positions[i]]
            nodes.append(rec)
        edges = [
            {
                "a": int(self._ids[self._ea[e]]),
                "b": int(self._ids[self._eb[e]]),
                "length": float(self._lengths[e]),
                "weight": float(self._eweights[e]),
            }
            for e in range(self.n_edges)
        ]
        meta = {}
        if self.mesh_size is not None:
            meta["h"] = self.mesh_size
        if self.dimension_hint is not None:
            meta["dim"] = self.dimension_hint
        return {"nodes": nodes, "edges": edges, "meta": meta}


def build_graph(nodes: Iterable, edges: Iterable) -> MetricMeasureGraph:
    """Build a space from explicit node and edge records.

    ``nodes``: ``(id, measure)`` / ``(id, measure, pos)`` tuples or dicts
    with those keys.  ``edges``: ``(a, b, length)`` / ``(a, b, length,
    weight)`` tuples or dicts; endpoints are node ids; weight defaults to 1.
    """
    ids, measures, positions = [], [], []
    for rec in nodes:
        if isinstance(rec, dict):
            ids.append(rec["id"])
            measures.append(rec["measure"])
            positions.append(rec.get("pos"))
        else:
            ids.append(rec[0])
            measures.append(rec[1])
            positions.append(rec[2] if len(rec) > 2 else None)
    have_pos = [p is not None for p in positions]
    if any(have_pos) and not all(have_pos):
        raise ValueError("either all nodes or no nodes may carry positions")
    pos_arr = np.asarray([np.atleast_1d(p) for p in positions], dtype=float) \
        if all(have_pos) and ids else None

    ea, eb, lengths, weights = [], [], [], []
    for rec in edges:
        if isinstance(rec, dict):
            a, b = rec["a"], rec["b"]
            lengths.append(rec["length"])
            weights.append(rec.get("weight", 1.0))
        else:
            a, b = rec[0], rec[1]
            lengths.append(rec[2])
            weights.append(rec[3] if len(rec) > 3 else 1.0)
        ea.append(a)
        eb.append(b)

    id_arr = np.asarray(ids, dtype=np.int64)
    lookup = {int(v): i for i, v in enumerate(id_arr)}
    if len(lookup) != len(id_arr):
        raise ValueError("node ids must be unique")
    try:
        ea_idx = [lookup[int(a)] for a in ea]
        eb_idx = [lookup[int(b)] for b in eb]
    except KeyError as exc:
        raise ValueError(f"edge endpoint references unknown node id {exc}")

    return MetricMeasureGraph(id_arr, measures, pos_arr, ea_idx, eb_idx,
                              lengths, weights)


def build_grid(domain, h: float, weight: WeightSpec = None,
               p: float = 2.0) -> MetricMeasureGraph:
    """Rasterize a geometric predicate on the lattice ``h * Z^d``.

    Nodes are lattice points satisfying the predicate; edges join lattice
    neighbors along each axis.  A node at ``x`` gets measure
    ``w(x) * h^d``; the edge between ``x`` and ``y`` gets length ``h`` and
    energy weight ``w((x+y)/2) * h^d``, which makes the edge energy sum
    with exponent ``p`` the lattice counterpart of the weighted Dirichlet
    integral with the per-axis convention.  The weight assignment itself
    does not depend on ``p``; the argument is validated for range only.
    """
    pred = parse_predicate(domain)
    if isinstance(pred, ListSet):
        raise ValueError("grid domains must be geometric predicates")
    if not (h > 0):
        raise ValueError("grid spacing h must be positive")
    if not (p >= 1):
        raise ValueError("exponent p must be >= 1")
    b = pred.bounds()
    if b is None:
        raise ValueError("grid domain must have bounded extent")
    lo, hi = b
    dim = len(lo)
    kmin = np.ceil((lo - _FUZZ * (1.0 + np.abs(lo))) / h).astype(np.int64)
    kmax = np.floor((hi + _FUZZ * (1.0 + np.abs(hi))) / h).astype(np.int64)
    if np.any(kmax < kmin):
        raise ValueError("empty rasterization: no lattice points in domain")

    shape = tuple(int(kmax[a] - kmin[a] + 1) for a in range(dim))
    grids = np.meshgrid(*[np.arange(kmin[a], kmax[a] + 1) for a in range(dim)],
                        indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    pts = coords * h
    mask = pred.contains(pts)
    if not mask.any():
        raise ValueError("empty rasterization: no lattice points in domain")
    coords = coords[mask]
    pos = coords * h
    count = coords.shape[0]

    wfun = as_weight(weight)
    node_w = np.asarray(wfun(pos), dtype=float)
    if node_w.shape != (count,) or not np.all(np.isfinite(node_w)) \
            or np.any(node_w <= 0):
        raise ValueError("weight field must be finite and positive at nodes")
    measures = node_w * h**dim

    # occupancy over the bounding lattice box for neighbor lookups
    strides = np.cumprod((1,) + shape[::-1][:-1])[::-1].astype(np.int64)
    rel = coords - kmin
    lin = rel @ strides
    occ = np.full(int(np.prod(shape)), -1, dtype=np.int64)
    occ[lin] = np.arange(count)

    ea_parts, eb_parts = [], []
    for ax in range(dim):
        ok = rel[:, ax] + 1 < shape[ax]
        src = np.nonzero(ok)[0]
        nbr = occ[lin[src] + strides[ax]]
        created = nbr >= 0
        ea_parts.append(src[created])
        eb_parts.append(nbr[created])
    if ea_parts:
        ea = np.concatenate(ea_parts)
        eb = np.concatenate(eb_parts)
    else:
        ea = np.empty(0, dtype=np.int64)
        eb = np.empty(0, dtype=np.int64)

    mid = 0.5 * (pos[ea] + pos[eb])
    edge_w = np.asarray(wfun(mid), dtype=float) if len(mid) else np.empty(0)
    if np.any(~np.isfinite(edge_w)) or np.any(edge_w <= 0):
        raise ValueError("weight field must be finite and positive at edge midpoints")
    lengths = np.full(ea.shape[0], float(h))
    eweights = edge_w * h**dim

    return MetricMeasureGraph(np.arange(count, dtype=np.int64), measures, pos,
                              ea, eb, lengths, eweights, mesh_size=h,
                              dimension_hint=dim)


def save_space(g: MetricMeasureGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_space(path) -> MetricMeasureGraph:
    with open(path) as fh:
        doc = json.load(fh)
    return space_from_dict(doc)


def space_from_dict(doc: dict) -> MetricMeasureGraph:
    try:
        nodes = doc["nodes"]
        edges = doc["edges"]
    except (TypeError, KeyError):
        raise ValueError("space document needs 'nodes' and 'edges'")
    g = build_graph(nodes, edges)
    meta = doc.get("meta") or {}
    g.mesh_size = float(meta["h"]) if "h" in meta else None
    g.dimension_hint = int(meta["dim"]) if "dim" in meta else None
    g._cache.pop("hash", None)
    return g


# ---------------------------------------------------------------------------
# node sets

@dataclass(frozen=True, eq=False)
class NodeSet:
    """A set of node ids with an openness tag and provenance note."""

    ids: np.ndarray
    openness: str = UNKNOWN
    provenance: str = "explicit"

    def __post_init__(self):
        arr = np.unique(np.asarray(self.ids, dtype=np.int64))
        arr.setflags(write=False)
        object.__setattr__(self, "ids", arr)
        if self.openness not in _FLAGS:
            raise ValueError(f"openness must be one of {_FLAGS}")

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def is_empty(self) -> bool:
        return self.ids.shape[0] == 0

    def __contains__(self, node_id) -> bool:
        i = np.searchsorted(self.ids, int(node_id))
        return i < len(self) and self.ids[i] == int(node_id)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NodeSet):
            return NotImplemented
        return (
            np.array_equal(self.ids, other.ids)
            and self.openness == other.openness
        )

    def __hash__(self):
        return hash((self.ids.tobytes(), self.openness))

    def __repr__(self):
        return (f"NodeSet(n={len(self)}, openness={self.openness!r}, "
                f"provenance={self.provenance!r})")

    def issubset(self, other: "NodeSet") -> bool:
        return bool(np.all(np.isin(self.ids, other.ids)))

    def union(self, other: "NodeSet") -> "NodeSet":
        return NodeSet(np.union1d(self.ids, other.ids),
                       combine_openness("union", [self.openness, other.openness]),
                       "derived")

    def intersect(self, other: "NodeSet") -> "NodeSet":
        return NodeSet(np.intersect1d(self.ids, other.ids),
                       combine_openness("inter", [self.openness, other.openness]),
                       "derived")

    def difference(self, other: "NodeSet") -> "NodeSet":
        return NodeSet(np.setdiff1d(self.ids, other.ids),
                       combine_openness("diff", [self.openness, other.openness]),
                       "derived")

    def tagged(self, openness: str) -> "NodeSet":
        return NodeSet(self.ids, openness, self.provenance)

    @classmethod
    def from_ids(cls, ids, openness: str = UNKNOWN,
                 provenance: str = "explicit") -> "NodeSet":
        return cls(np.asarray(list(ids), dtype=np.int64), openness, provenance)


def empty_set() -> NodeSet:
    return NodeSet(np.empty(0, dtype=np.int64), UNKNOWN, "explicit")


def all_nodes(g: MetricMeasureGraph, openness: str = UNKNOWN) -> NodeSet:
    return NodeSet(g.ids, openness, "whole space")


@dataclass(frozen=True)
class SetFamily:
    """A finite list of node sets with a declared monotonicity."""

    members: tuple
    monotone: str  # "increasing" | "decreasing" | "none"

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if self.monotone not in ("increasing", "decreasing", "none"):
            raise ValueError("monotone must be increasing/decreasing/none")
        if self.monotone == "increasing":
            for a, b in zip(members, members[1:]):
                if not a.issubset(b):
                    raise ValueError("family is not increasing")
        if self.monotone == "decreasing":
            for a, b in zip(members, members[1:]):
                if not b.issubset(a):
                    raise ValueError("family is not decreasing")

    def __len__(self):
        return len(self.members)


# ---------------------------------------------------------------------------
# set resolution against a space

def resolve_set(g: MetricMeasureGraph, spec) -> NodeSet:
    """Resolve a predicate tree (or explicit list) to a tagged NodeSet."""
    if isinstance(spec, NodeSet):
        return spec
    pred = parse_predicate(spec)
    mask, flag = _resolve_mask(g, pred)
    return NodeSet(g.ids[mask], flag,
                   "explicit" if isinstance(pred, ListSet) else "geometric")


def _resolve_mask(g: MetricMeasureGraph, pred: Predicate):
    if isinstance(pred, ListSet):
        arr = np.asarray(pred.ids, dtype=np.int64)
        idx = g.index_of(arr) if arr.size else np.empty(0, dtype=np.int64)
        mask = np.zeros(g.n_nodes, dtype=bool)
        mask[idx] = True
        return mask, UNKNOWN
    if isinstance(pred, SetOp):
        masks, flags = zip(*[_resolve_mask(g, p) for p in pred.parts])
        if pred.kind == "union":
            out = masks[0].copy()
            for m in masks[1:]:
                out |= m
        elif pred.kind == "inter":
            out = masks[0].copy()
            for m in masks[1:]:
                out &= m
        else:
            out = masks[0] & ~masks[1]
        return out, combine_openness(pred.kind, list(flags))
    if not g.has_positions:
        raise ValueError("geometric set specs require node positions")
    return pred.contains(g.positions), pred.openness()


# ---------------------------------------------------------------------------
# combinatorial topology

def _membership(g: MetricMeasureGraph, s: NodeSet) -> np.ndarray:
    mask = np.zeros(g.n_nodes, dtype=bool)
    if len(s):
        mask[g.index_of(s.ids)] = True
    return mask


def interior(g: MetricMeasureGraph, s: NodeSet) -> NodeSet:
    """Members all of whose neighbors also belong to the set."""
    m = _membership(g, s)
    spoiled = np.zeros(g.n_nodes, dtype=bool)
    cross_a = m[g.edge_a] & ~m[g.edge_b]
    cross_b = m[g.edge_b] & ~m[g.edge_a]
    spoiled[g.edge_a[cross_a]] = True
    spoiled[g.edge_b[cross_b]] = True
    return NodeSet(g.ids[m & ~spoiled], OPEN, "interior")


def closure(g: MetricMeasureGraph, s: NodeSet) -> NodeSet:
    """The set together with all neighbors of its members."""
    m = _membership(g, s)
    out = m.copy()
    out[g.edge_b[m[g.edge_a]]] = True
    out[g.edge_a[m[g.edge_b]]] = True
    return NodeSet(g.ids[out], CLOSED, "closure")


def boundary(g: MetricMeasureGraph, s: NodeSet) -> NodeSet:
    """Discrete boundary of a node set.

    For sets tagged ``closed`` this is the inner vertex boundary (members
    with a neighbor outside), which is contained in the set.  Otherwise it
    is ``closure minus interior``, the two-sided node layer around the
    membership cut.
    """
    if s.openness == CLOSED:
        m = _membership(g, s)
        exposed = np.zeros(g.n_nodes, dtype=bool)
        cross_a = m[g.edge_a] & ~m[g.edge_b]
        cross_b = m[g.edge_b] & ~m[g.edge_a]
        exposed[g.edge_a[cross_a]] = True
        exposed[g.edge_b[cross_b]] = True
        return NodeSet(g.ids[m & exposed], CLOSED, "boundary")
    return closure(g, s).difference(interior(g, s)).tagged(CLOSED)


def is_combinatorially_open(g: MetricMeasureGraph, s: NodeSet) -> bool:
    return len(interior(g, s)) == len(s)


def is_relatively_open(g: MetricMeasureGraph, sub: NodeSet,
                       ambient: NodeSet) -> bool:
    """True when every ambient-neighbor of a member is again a member."""
    m = _membership(g, sub)
    amb = _membership(g, ambient)
    cross_a = m[g.edge_a] & amb[g.edge_b] & ~m[g.edge_b]
    cross_b = m[g.edge_b] & amb[g.edge_a] & ~m[g.edge_a]
    return not (np.any(cross_a) or np.any(cross_b))


def dilate(g: MetricMeasureGraph, s: NodeSet, eps: float) -> NodeSet:
    """All nodes within distance ``eps`` of the set.

    Euclidean distance when the space carries positions, shortest-path
    distance along edge lengths otherwise.  The result is tagged open: it
    stands in for the continuum eps-neighborhood.
    """
    if not (eps > 0):
        raise ValueError("dilation radius must be positive")
    if s.is_empty:
        return NodeSet(s.ids, OPEN, "dilation")
    idx = g.index_of(s.ids)
    if g.has_positions:
        tree = cKDTree(g.positions[idx])
        dist, _ = tree.query(g.positions, k=1)
    else:
        dist = csgraph.dijkstra(g.length_matrix(), directed=False,
                                indices=idx, min_only=True)
    keep = dist <= eps + _FUZZ * (1.0 + eps)
    return NodeSet(g.ids[keep], OPEN, "dilation")


def restrict_ambient(g: MetricMeasureGraph, y: NodeSet) -> MetricMeasureGraph:
    """Induced subgraph on ``y`` with inherited data and original ids."""
    if y.is_empty:
        raise ValueError("cannot restrict to an empty ambient set")
    if not g.has_ids(y.ids):
        raise ValueError("ambient set references unknown node ids")
    keep = _membership(g, y)
    new_index = np.full(g.n_nodes, -1, dtype=np.int64)
    new_index[keep] = np.arange(int(keep.sum()))
    ekeep = keep[g.edge_a] & keep[g.edge_b]
    return MetricMeasureGraph(
        g.ids[keep], g.measures[keep],
        g.positions[keep] if g.has_positions else None,
        new_index[g.edge_a[ekeep]], new_index[g.edge_b[ekeep]],
        g.lengths[ekeep], g.eweights[ekeep],
        mesh_size=g.mesh_size, dimension_hint=g.dimension_hint,
    )
