"""Property suites: capacity axioms, refinement experiments, convergence.

``check_capacity_axioms`` draws seeded random set instances inside a domain
and evaluates every capacity inequality the package promises, recording a
margin for each; a check passes when ``margin >= -tol``.  ``run_paper_example``
executes the named refinement experiments (trend assertions over a mesh
schedule).  ``convergence_study`` compares solved capacities against the
registered closed-form target for a fixture family.

Reports are deterministic given (seed, config, space): instance order is
fixed and the JSON serialization sorts keys.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import fixtures as fx
from .capacity import (
    boundary_capacity_check,
    outer_capacity_profile,
    sobolev_capacity,
    tilde_capacity,
    variational_capacity,
)
from .newtonian import (
    min_upper_gradient,
    p_energy,
    sample_paths,
    verify_upper_gradient,
)
from .solver import SolverConfig, poincare_constant
from .space import (
    CLOSED,
    OPEN,
    MetricMeasureGraph,
    NodeSet,
    all_nodes,
    dilate,
    empty_set,
    restrict_ambient,
)


@dataclass
class CheckRecord:
    name: str
    tag: str
    instance: int
    lhs: float
    rhs: float
    margin: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "tag": self.tag,
            "instance": self.instance,
            "lhs": _jsonable(self.lhs),
            "rhs": _jsonable(self.rhs),
            "margin": _jsonable(self.margin),
            "pass": bool(self.passed),
        }
        if self.note:
            doc["note"] = self.note
        return doc


@dataclass
class PropertyReport:
    suite: str
    config: dict
    checks: List[CheckRecord] = field(default_factory=list)
    plot_series: List[dict] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> List[CheckRecord]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> dict:
        n = len(self.checks)
        good = sum(1 for c in self.checks if c.passed)
        return {"checks": n, "passed": good, "failed": n - good,
                "all_pass": good == n}

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "config": {k: _jsonable(v) for k, v in sorted(self.config.items())},
            "checks": [c.to_dict() for c in self.checks],
            "summary": self.summary(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "tag", "instance", "lhs", "rhs", "margin",
                         "pass"])
        for c in self.checks:
            writer.writerow([c.name, c.tag, c.instance, repr(float(c.lhs)),
                             repr(float(c.rhs)), repr(float(c.margin)),
                             c.passed])
        return buf.getvalue()

    def margins_by_tag(self) -> dict:
        out: dict = {}
        for c in self.checks:
            out.setdefault(c.tag, []).append(c.margin)
        return out


def _jsonable(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.floating):
        return _jsonable(float(x))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass(frozen=True)
class ExperimentSpec:
    """A named refinement experiment over a strictly decreasing mesh schedule."""

    name: str
    h_schedule: tuple
    p: float
    expected_trend: str  # converge-to-value | monotone-growth | monotone-decay

    def __post_init__(self):
        hs = tuple(float(h) for h in self.h_schedule)
        if not hs or any(h <= 0 for h in hs):
            raise ValueError("mesh schedule must be positive")
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("mesh schedule must be strictly decreasing")
        if self.expected_trend not in ("converge-to-value", "monotone-growth",
                                       "monotone-decay"):
            raise ValueError(f"unknown trend {self.expected_trend!r}")
        object.__setattr__(self, "h_schedule", hs)


# ---------------------------------------------------------------------------
# random instance generation

def _rand_blob(rng, g: MetricMeasureGraph, within: NodeSet,
               max_shapes: int = 3) -> NodeSet:
    """Union of 1-3 small closed boxes/balls centered at member nodes."""
    if within.is_empty:
        return within.tagged(CLOSED)
    if not g.has_positions:
        k = int(rng.integers(1, len(within) + 1))
        ids = rng.choice(within.ids, size=k, replace=False)
        return NodeSet(ids, CLOSED, "random subset")
    pos = g.positions[g.index_of(within.ids)]
    h = g.mesh_size if g.mesh_size else g.min_edge_length
    mask = np.zeros(len(within), dtype=bool)
    for _ in range(int(rng.integers(1, max_shapes + 1))):
        c = pos[int(rng.integers(len(within)))]
        if rng.random() < 0.5:
            half = rng.uniform(0.5 * h, 3.0 * h, size=pos.shape[1])
            mask |= np.all(np.abs(pos - c) <= half + 1e-12, axis=1)
        else:
            rad = float(rng.uniform(0.5 * h, 3.0 * h))
            mask |= np.linalg.norm(pos - c, axis=1) <= rad + 1e-12
    return NodeSet(within.ids[mask], CLOSED, "random blob")


class _CapCache:
    """Memoizes condenser solves keyed on (A, E, ambient, p)."""

    def __init__(self, g: MetricMeasureGraph, cfg: Optional[SolverConfig]):
        self.g = g
        self.cfg = cfg
        self.store: dict = {}
        self.subgraphs: dict = {}

    def cap(self, a: NodeSet, e: NodeSet, p: float, ambient: NodeSet = None):
        amb_key = b"" if ambient is None else ambient.ids.tobytes()
        key = ("cap", a.ids.tobytes(), e.ids.tobytes(), amb_key, p)
        if key not in self.store:
            if ambient is None:
                g = self.g
            else:
                if amb_key not in self.subgraphs:
                    self.subgraphs[amb_key] = restrict_ambient(self.g, ambient)
                g = self.subgraphs[amb_key]
            self.store[key] = variational_capacity(g, a, e, p, self.cfg)
        return self.store[key]

    def sob(self, a: NodeSet, p: float):
        key = ("sob", a.ids.tobytes(), p)
        if key not in self.store:
            self.store[key] = sobolev_capacity(self.g, a, p, self.cfg)
        return self.store[key]


# ---------------------------------------------------------------------------
# the axiom suite

def check_capacity_axioms(
    g: MetricMeasureGraph,
    e_set: NodeSet,
    p: float,
    n_instances: int = 20,
    seed: int = 0,
    cfg: Optional[SolverConfig] = None,
    tol: float = 1e-7,
) -> PropertyReport:
    """Evaluate every promised capacity inequality on seeded random sets.

    A failed or non-converged solve marks the affected checks failed; it is
    never silently dropped.  ``n_instances == 0`` runs the single trivial
    instance built from empty sets.
    """
    if n_instances < 0:
        raise ValueError("n_instances must be nonnegative")
    rng = np.random.default_rng(seed)
    cache = _CapCache(g, cfg)
    records: List[CheckRecord] = []
    report = PropertyReport(
        suite="capacity-axioms",
        config={"p": p, "seed": seed, "n_instances": n_instances,
                "tol": tol, "space_hash": g.space_hash,
                "e_size": len(e_set)},
        checks=records,
    )

    h = g.mesh_size if g.mesh_size else g.min_edge_length
    whole = all_nodes(g)
    p1_mode = p < 1.0 + 1e-6

    def rec(name, tag, inst, lhs, rhs, margin, results=(), note="",
            tol_here=None):
        t = tol if tol_here is None else tol_here
        solved = all(r.diagnostics.converged for r in results if r is not None)
        ok = bool(margin >= -t) and solved
        if not solved:
            note = (note + "; " if note else "") + "solver did not converge"
        records.append(CheckRecord(name, tag, inst, float(lhs), float(rhs),
                                   float(margin), ok, note))

    # suite-level facts, recorded once under instance -1
    r_empty = cache.cap(empty_set(), e_set, p)
    rec("empty-set-capacity", "thm-cp-i", -1, r_empty.value, 0.0,
        -abs(r_empty.value), [r_empty])
    s_empty = cache.sob(empty_set(), p)
    rec("empty-set-sobolev", "zero-sets", -1, s_empty.value, 0.0,
        -abs(s_empty.value), [s_empty])

    c_poincare = None
    if abs(p - 2.0) < 1e-12 and not e_set.is_empty \
            and len(e_set) < g.n_nodes:
        c_poincare, _ = poincare_constant(g, e_set, 2.0)

    n_rounds = n_instances if n_instances > 0 else 1
    for inst in range(n_rounds):
        if n_instances == 0:
            a1 = empty_set().tagged(CLOSED)
            a2 = empty_set().tagged(CLOSED)
            a3 = empty_set().tagged(CLOSED)
        else:
            a1 = _rand_blob(rng, g, e_set)
            a2 = _rand_blob(rng, g, e_set)
            a3 = _rand_blob(rng, g, e_set)
        union = a1.union(a2).tagged(CLOSED)
        inter = a1.intersect(a2).tagged(CLOSED)

        r1 = cache.cap(a1, e_set, p)
        r2 = cache.cap(a2, e_set, p)
        ru = cache.cap(union, e_set, p)
        ri = cache.cap(inter, e_set, p)

        rec("monotone-in-A", "thm-cp-ii", inst,
            max(r1.value, r2.value), ru.value,
            min(ru.value - r1.value, ru.value - r2.value), [r1, r2, ru])

        e_small = e_set.difference(a3.difference(a1))
        r_small = cache.cap(a1, e_small, p)
        rec("antitone-in-E", "thm-cp-iii", inst, r1.value, r_small.value,
            r_small.value - r1.value, [r1, r_small])

        rec("strong-subadditivity", "thm-cp-iv", inst,
            ru.value + ri.value, r1.value + r2.value,
            r1.value + r2.value - ru.value - ri.value, [r1, r2, ru, ri])

        r3 = cache.cap(a3, e_set, p)
        union3 = union.union(a3).tagged(CLOSED)
        ru3 = cache.cap(union3, e_set, p)
        rec("finite-subadditivity", "thm-cp-v", inst,
            ru3.value, r1.value + r2.value + r3.value,
            r1.value + r2.value + r3.value - ru3.value, [r1, r2, r3, ru3])

        # the increasing chain inter <= a1 <= union stabilizes at its top;
        # cap of the chain union must equal the value at the stabilization
        # index (the limit of the increasing capacity sequence)
        chain_union = inter.union(a1).union(union).tagged(CLOSED)
        chain_top = cache.cap(chain_union, e_set, p)
        rec("increasing-union-stabilized", "thm-cp-vi", inst,
            chain_top.value, ru.value, -abs(chain_top.value - ru.value),
            [chain_top, ru],
            note="report-only at p=1" if p1_mode else "")

        # the decreasing chain union >= a1 >= inter stabilizes at its bottom
        chain_inter = union.intersect(a1).intersect(inter).tagged(CLOSED)
        chain_bot = cache.cap(chain_inter, e_set, p)
        rec("decreasing-compacts-stabilized", "thm-ki", inst,
            chain_bot.value, ri.value, -abs(chain_bot.value - ri.value),
            [chain_bot, ri])

        capf, caprim, pasted = boundary_capacity_check(g, a1, e_set, p,
                                                       cache.cfg)
        rec("boundary-identity", "thm-cp-vii", inst, capf.value,
            caprim.value, -abs(capf.value - caprim.value), [capf, caprim],
            tol_here=2 * tol)
        pasted_energy = p_energy(g, min_upper_gradient(g, pasted), p)
        rec("boundary-pasting", "thm-cp-vii", inst, pasted_energy,
            caprim.value, caprim.value - pasted_energy, [caprim])

        prof = outer_capacity_profile(g, a1, e_set, p,
                                      [4.0 * h, 2.0 * h, 0.45 * h], cache.cfg)
        worst = min((x - y for x, y in zip(prof.values, prof.values[1:])),
                    default=0.0)
        rec("outer-profile-monotone", "outer-profile", inst,
            prof.values[0], prof.values[-1], worst, prof.results)
        rec("outer-profile-limit", "outer-profile", inst, prof.values[-1],
            r1.value, -abs(prof.values[-1] - r1.value),
            list(prof.results) + [r1])

        if a1.is_empty:
            rec("zero-iff-empty", "zero-sets", inst, r1.value, 0.0,
                -abs(r1.value), [r1])
        else:
            s1 = cache.sob(a1, p)
            rec("zero-iff-empty", "zero-sets", inst,
                min(r1.value, s1.value), 1e-10,
                min(r1.value, s1.value) - 1e-10, [r1, s1], tol_here=0.0)
            if c_poincare is not None:
                bound = (1.0 + c_poincare) * r1.value
                rec("sobolev-capacity-bound", "zero-sets", inst, s1.value,
                    bound, bound - s1.value, [r1, s1])

        y1 = e_set.union(_rand_blob(rng, g, whole)) if n_instances else whole
        r_y1 = cache.cap(a1, e_set, p, ambient=y1)
        r_y2 = cache.cap(a1, e_set, p, ambient=whole)
        rec("ambient-monotone", "ambient-mono", inst, r_y1.value,
            r_y2.value, r_y2.value - r_y1.value, [r_y1, r_y2])

        r_tilde = tilde_capacity(g, a1, e_set, p, cfg=cache.cfg)
        rec("tilde-dominates-cap", "tilde-ge-cap", inst, r_tilde.value,
            r1.value, r_tilde.value - r1.value, [r_tilde, r1])

        if not a1.is_empty and r1.potential is not None:
            u = r1.potential
            a_idx = g.index_of(a1.ids)
            out_mask = np.ones(g.n_nodes, dtype=bool)
            out_mask[g.index_of(e_set.ids)] = False
            cons = max(
                float(np.abs(u.values[a_idx] - 1.0).max()),
                float(np.abs(u.values[out_mask]).max()) if out_mask.any() else 0.0,
                float(max(u.values.max() - 1.0, 0.0)),
                float(max(-u.values.min(), 0.0)),
            )
            paths = sample_paths(g, n_paths=8, max_len=6,
                                 rng=np.random.default_rng(seed * 1000 + inst))
            ok_ug, worst_ug = verify_upper_gradient(
                g, u, min_upper_gradient(g, u), paths)
            rec("potential-admissible", "potential", inst,
                max(cons, worst_ug), 0.0, -max(cons, worst_ug), [r1],
                tol_here=1e-9)

    return report


# ---------------------------------------------------------------------------
# refinement experiments

_STRICT_GAP = 1e-12

_EXAMPLES = {
    "closed-square": ExperimentSpec("closed-square", (1 / 8, 1 / 16, 1 / 32),
                                    1.5, "monotone-decay"),
    "bowtie": ExperimentSpec("bowtie", (1 / 8, 1 / 16, 1 / 32), 1.5,
                             "monotone-decay"),
    "boundary-reach": ExperimentSpec("boundary-reach", (1 / 16, 1 / 32, 1 / 64),
                                     1.5, "converge-to-value"),
    "dense-disk": ExperimentSpec("dense-disk", (1 / 16,), 1.5,
                                 "converge-to-value"),
}

_TILDE_EPS = (0.5, 0.375, 0.25)


def example_spec(name: str, h_schedule: Optional[Sequence[float]] = None,
                 p: Optional[float] = None) -> ExperimentSpec:
    base = _EXAMPLES.get(name)
    if base is None:
        raise ValueError(f"unknown example {name!r}; "
                         f"choices: {sorted(_EXAMPLES)}")
    return ExperimentSpec(
        base.name,
        tuple(h_schedule) if h_schedule is not None else base.h_schedule,
        float(p) if p is not None else base.p,
        base.expected_trend,
    )


def _trend_records(records, name, tag, values, hs, direction, results):
    """Append strict monotone-trend records for consecutive mesh levels."""
    for k in range(len(values) - 1):
        a, b = values[k], values[k + 1]
        if direction == "decay":
            margin = (a - b) - _STRICT_GAP
        else:
            margin = (b - a) - _STRICT_GAP
        solved = all(r.diagnostics.converged for r in results[k:k + 2])
        ok = margin >= 0 and solved
        note = "" if solved else "solver did not converge"
        records.append(CheckRecord(f"{name}[h={hs[k]:g}->h={hs[k + 1]:g}]",
                                   tag, k, float(a), float(b), float(margin),
                                   ok, note))


def run_paper_example(spec, cfg: Optional[SolverConfig] = None) -> PropertyReport:
    """Run a registered refinement experiment and assert its trend."""
    if isinstance(spec, str):
        spec = example_spec(spec)
    if spec.name not in _EXAMPLES:
        raise ValueError(f"unknown example {spec.name!r}; "
                         f"choices: {sorted(_EXAMPLES)}")
    records: List[CheckRecord] = []
    plots: List[dict] = []
    report = PropertyReport(
        suite=f"example:{spec.name}",
        config={"name": spec.name, "p": spec.p,
                "h_schedule": list(spec.h_schedule),
                "trend": spec.expected_trend},
        checks=records,
        plot_series=plots,
    )

    if spec.name == "closed-square":
        caps, tils, rc, rt = [], [], [], []
        for h in spec.h_schedule:
            f = fx.closed_square(h)
            r = variational_capacity(f.g, f.a_set, f.e_set, spec.p, cfg)
            fam = _dilation_family(f, _TILDE_EPS)
            t = tilde_capacity(f.g, f.a_set, f.e_set, spec.p, fam, cfg)
            caps.append(r.value)
            tils.append(t.value)
            rc.append(r)
            rt.append(t)
        _trend_records(records, "cap-decays", "example-trend", caps,
                       spec.h_schedule, "decay", rc)
        _trend_records(records, "tilde-grows", "example-trend", tils,
                       spec.h_schedule, "growth", rt)
        plots.append({"check": "cap-decays", "x": list(spec.h_schedule),
                      "y": caps})
        plots.append({"check": "tilde-grows", "x": list(spec.h_schedule),
                      "y": tils})

    elif spec.name == "bowtie":
        caps, tils, rc, rt = [], [], [], []
        for h in spec.h_schedule:
            f = fx.bowtie(h)
            r = variational_capacity(f.g, f.a_set, f.e_set, spec.p, cfg)
            e2 = f.params["e2_set"]
            fam = [dilate(f.g, f.a_set, eps).intersect(e2).tagged(OPEN)
                   for eps in _TILDE_EPS]
            t = tilde_capacity(f.g, f.a_set, e2, spec.p, fam, cfg)
            caps.append(r.value)
            tils.append(t.value)
            rc.append(r)
            rt.append(t)
        _trend_records(records, "cap-on-E1-decays", "example-trend", caps,
                       spec.h_schedule, "decay", rc)
        _trend_records(records, "tilde-on-E2-grows", "example-trend", tils,
                       spec.h_schedule, "growth", rt)
        plots.append({"check": "cap-on-E1-decays",
                      "x": list(spec.h_schedule), "y": caps})
        plots.append({"check": "tilde-on-E2-grows",
                      "x": list(spec.h_schedule), "y": tils})

    elif spec.name == "boundary-reach":
        vals, rs = [], []
        touched = True
        for h in spec.h_schedule:
            f = fx.boundary_reach(h)
            r = variational_capacity(f.g, f.a_set, f.e_set, spec.p, cfg)
            vals.append(r.value), rs.append(r)
            touched = touched and r.flags.get("A_touches_boundary", False)
        finite = all(math.isfinite(v) for v in vals)
        records.append(CheckRecord("cap-stays-finite", "example-trend", 0,
                                   max(vals), math.inf,
                                   0.0 if finite else -math.inf, finite))
        records.append(CheckRecord("A-touches-boundary-flag", "example-trend",
                                   0, 1.0 if touched else 0.0, 1.0,
                                   0.0 if touched else -1.0, touched))
        if len(vals) >= 2:
            rel = abs(vals[-1] - vals[-2]) / max(abs(vals[-1]), 1e-300)
            solved = all(r.diagnostics.converged for r in rs[-2:])
            records.append(CheckRecord("cap-stabilizes", "example-trend", 0,
                                       rel, 0.10, 0.10 - rel,
                                       bool(rel <= 0.10) and solved))
        plots.append({"check": "cap-stays-finite",
                      "x": list(spec.h_schedule), "y": vals})

    elif spec.name == "dense-disk":
        h = spec.h_schedule[-1]
        f = fx.dense_disk(h)
        ball = f.params["ball_set"]
        a_cut = f.a_set.intersect(f.e_set)
        r_e = variational_capacity(f.g, a_cut, f.e_set, spec.p, cfg)
        r_b = variational_capacity(f.g, f.a_set, ball, spec.p, cfg)
        diff = abs(r_e.value - r_b.value)
        solved = r_e.diagnostics.converged and r_b.diagnostics.converged
        records.append(CheckRecord("punctured-equals-unpunctured",
                                   "example-trend", 0, r_e.value, r_b.value,
                                   1e-8 - diff,
                                   bool(diff <= 1e-8) and solved,
                                   note=f.params["note"]))
        report.config["note"] = f.params["note"]

    return report


def _dilation_family(f, eps_values):
    return [dilate(f.g, f.a_set, eps).intersect(f.e_set).tagged(OPEN)
            for eps in eps_values]


# ---------------------------------------------------------------------------
# convergence against closed forms

_CONVERGENCE_TOL = {"annulus": 0.02, "radial-path": 1e-6}


def convergence_study(
    fixture_name: str,
    h_schedule: Sequence[float],
    p: float,
    cfg: Optional[SolverConfig] = None,
    weight=None,
    n: int = 2,
    tol_rel: Optional[float] = None,
) -> PropertyReport:
    """Solve a fixture across a mesh schedule and compare to its oracle.

    ``annulus`` registers an oracle only at p=2; the 1-D radial reduction
    covers every p > 1 (optionally weighted).  The monotonicity record
    carries a 1e-9 additive slack so solver-noise-level errors do not flip
    it.
    """
    hs = [float(h) for h in h_schedule]
    if not hs or any(h <= 0 for h in hs):
        raise ValueError("mesh schedule must be positive")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("mesh schedule must be strictly decreasing")
    if fixture_name not in _CONVERGENCE_TOL:
        raise ValueError(f"no registered oracle for {fixture_name!r}; "
                         f"choices: {sorted(_CONVERGENCE_TOL)}")
    if fixture_name == "annulus" and abs(p - 2.0) > 1e-12:
        raise ValueError("the annulus oracle is registered only for p = 2")
    tol = _CONVERGENCE_TOL[fixture_name] if tol_rel is None else float(tol_rel)

    records: List[CheckRecord] = []
    plots: List[dict] = []
    report = PropertyReport(
        suite=f"convergence:{fixture_name}",
        config={"fixture": fixture_name, "p": p, "h_schedule": hs,
                "tol_rel": tol, "n": n},
        checks=records,
        plot_series=plots,
    )

    errors, values, results = [], [], []
    target = None
    for h in hs:
        if fixture_name == "annulus":
            f = fx.annulus(h)
        else:
            r0, r1 = 1.0, 2.0
            num = max(2, int(round((r1 - r0) / h)))
            f = fx.radial_condenser_path(r0, r1, num, p, n, weight)
        target = f.params["oracle"]
        r = variational_capacity(f.g, f.a_set, f.e_set, p, cfg)
        values.append(r.value)
        results.append(r)
        errors.append(abs(r.value - target) / abs(target))

    report.config["target"] = _jsonable(float(target))
    for k, h in enumerate(hs):
        records.append(CheckRecord(f"value[h={h:g}]", "convergence", k,
                                   values[k], target, tol - errors[k],
                                   bool(errors[k] <= tol)
                                   and results[k].diagnostics.converged))
    if len(hs) >= 2:
        slack = 1e-9
        records.append(CheckRecord("error-nonincreasing", "convergence",
                                   len(hs) - 1, errors[-1], errors[-2],
                                   errors[-2] - errors[-1] + slack,
                                   bool(errors[-1] <= errors[-2] + slack)))
    plots.append({"check": "relative-error", "x": hs, "y": errors})
    return report
