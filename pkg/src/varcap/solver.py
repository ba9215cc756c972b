"""Constrained minimization of the edge p-energy.

The problem solved here: given boundary values on a pinned node set,
minimize ``sum_e kappa_e |u(a_e) - u(b_e)|^p`` over the free node values,
optionally plus a measure term ``sum_x m_x |u(x)|^p``.  Here ``kappa_e =
w_e / length_e^p`` so that the edge term equals the weighted p-th power of
the difference quotient.

* ``p == 2`` is a single sparse SPD linear solve.
* ``p != 2`` runs damped Newton iterations (iteratively reweighted sparse
  solves with an Armijo line search on the objective), warm-started from
  the quadratic solution.  For ``p < 2`` the kink of ``|t|^p`` is smoothed
  to ``(t^2 + eps^2)^(p/2) - eps^p`` inside the iteration only; reported
  energies elsewhere in the package are recomputed without smoothing.

Free nodes in graph components that contain no pinned node are set to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple, Union

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu
import scipy.linalg

from . import kernels
from .newtonian import DiscreteFunction
from .space import CLOSED, MetricMeasureGraph, NodeSet

_ARMIJO_C = 1e-4
_MIN_STEP = 1e-16


@dataclass(frozen=True)
class SolverConfig:
    """Solver parameters.

    ``p`` is the energy exponent (>= 1; values below 2, including 1, use
    the epsilon-regularized objective).  ``tol_energy`` bounds the relative
    energy decrease per accepted step at convergence, ``tol_kkt`` bounds
    the scaled sup-norm of the energy gradient on free nodes.
    ``force_iterative`` routes p == 2 through the Newton path (used for
    cross-checking the direct solve).
    """

    p: float = 2.0
    tol_energy: float = 1e-10
    tol_kkt: float = 1e-8
    max_iter: int = 10000
    epsilon_reg: float = 1e-12
    force_iterative: bool = False

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError("exponent p must be >= 1")
        if self.p < 2 and not (self.epsilon_reg > 0):
            raise ValueError("epsilon_reg must be positive for p < 2")
        if not (self.tol_energy > 0 and self.tol_kkt > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @property
    def smoothing_eps(self) -> float:
        if self.p >= 2:
            return 0.0
        if self.p == 1.0:
            # at p = 1 the kink scale of the smoothed minimizer is of
            # order eps itself, so eps below float resolution stalls the
            # iteration; floor it
            return max(self.epsilon_reg, 1e-8)
        return self.epsilon_reg


@dataclass
class SolveDiagnostics:
    iterations: int
    final_energy: float
    final_kkt: float
    energy_history: list
    converged: bool


def _fixed_arrays(g: MetricMeasureGraph, fixed) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(fixed, Mapping):
        items = list(fixed.items())
    else:
        items = list(fixed)
    if not items:
        raise ValueError("the pinned node set must be nonempty")
    seen: dict = {}
    for node_id, val in items:
        node_id = int(node_id)
        val = float(val)
        if not math.isfinite(val):
            raise ValueError("pinned values must be finite")
        if node_id in seen and seen[node_id] != val:
            raise ValueError(f"conflicting pinned values for node {node_id}")
        seen[node_id] = val
    ids = np.fromiter(seen.keys(), dtype=np.int64, count=len(seen))
    vals = np.fromiter(seen.values(), dtype=float, count=len(seen))
    return g.index_of(ids), vals


class _Pinned:
    """Shared state for one constrained solve."""

    def __init__(self, g: MetricMeasureGraph, fixed_idx, fixed_val, free_idx,
                 p: float, eps: float, mass: Optional[np.ndarray]):
        n = g.n_nodes
        self.g = g
        self.p = p
        self.eps = eps
        self.mass = mass
        self.kappa = g.eweights / g.lengths**p

        overlap = np.intersect1d(fixed_idx, free_idx)
        if overlap.size:
            raise ValueError("free and pinned node sets overlap")

        # uncovered nodes and free nodes in components without any pinned
        # node are pinned to zero
        covered = np.zeros(n, dtype=bool)
        covered[fixed_idx] = True
        covered[free_idx] = True
        extra0 = np.nonzero(~covered)[0]

        labels = g.component_labels()
        anchored = np.zeros(labels.max() + 1 if n else 1, dtype=bool)
        anchored[labels[fixed_idx]] = True
        stranded = free_idx[~anchored[labels[free_idx]]]
        free_idx = free_idx[anchored[labels[free_idx]]]

        self.pin_idx = np.concatenate([fixed_idx, extra0, stranded])
        self.pin_val = np.concatenate(
            [fixed_val, np.zeros(extra0.size), np.zeros(stranded.size)]
        )
        self.free_idx = np.sort(free_idx)
        self.n_free = self.free_idx.size

        pos = np.full(n, -1, dtype=np.int64)
        pos[self.free_idx] = np.arange(self.n_free)
        ia = pos[g.edge_a]
        ib = pos[g.edge_b]
        pe = np.nonzero((ia >= 0) | (ib >= 0))[0]
        self.pe = pe
        pia, pib = ia[pe], ib[pe]
        both = (pia >= 0) & (pib >= 0)
        amask = (pia >= 0) & (pib < 0)
        bmask = (pia < 0) & (pib >= 0)
        self.groups = (both, amask, bmask)
        fa, fb = pia[both], pib[both]
        diag = np.arange(self.n_free, dtype=np.int64)
        self.rows = np.concatenate([fa, fb, fa, fb, pia[amask], pib[bmask], diag])
        self.cols = np.concatenate([fa, fb, fb, fa, pia[amask], pib[bmask], diag])
        self.rhs_a = (pia[amask], g.edge_b[pe[amask]])
        self.rhs_b = (pib[bmask], g.edge_a[pe[bmask]])

    def base_vector(self, init: Optional[np.ndarray]) -> np.ndarray:
        u = np.zeros(self.g.n_nodes)
        if init is not None:
            u[self.free_idx] = init[self.free_idx]
        u[self.pin_idx] = self.pin_val
        return u

    def energy(self, u: np.ndarray) -> float:
        g = self.g
        d = kernels.edge_diffs(u, g.edge_a, g.edge_b)
        val = kernels.phi_sum(d, self.kappa, self.p, self.eps)
        if self.mass is not None:
            val += kernels.phi_sum(u, self.mass, self.p, self.eps)
        return val

    def grad_free(self, u: np.ndarray) -> np.ndarray:
        g = self.g
        d = kernels.edge_diffs(u, g.edge_a, g.edge_b)
        ge = kernels.phi_grad(d, self.kappa, self.p, self.eps)
        full = kernels.scatter_signed(ge, g.edge_a, g.edge_b, g.n_nodes)
        if self.mass is not None:
            full += kernels.phi_grad(u, self.mass, self.p, self.eps)
        return full[self.free_idx]

    def step_matrix(self, u: np.ndarray, shift: float = 0.0) -> csc_matrix:
        """Quadratic model for one inner iteration.

        For p < 2 the edge coefficients are the majorize-minimize weights
        kappa*p*(d^2+eps^2)^(p/2-1): the resulting step is an IRLS update
        whose full step is guaranteed to decrease the smoothed energy.
        For p >= 2 they are the true second derivatives (Newton).
        """
        g = self.g
        d = kernels.edge_diffs(u, g.edge_a, g.edge_b)
        if self.p < 2.0:
            q = d * d + self.eps * self.eps
            om = (self.kappa * self.p * q ** (0.5 * self.p - 1.0))[self.pe]
        else:
            om = kernels.phi_hess(d, self.kappa, self.p, self.eps)[self.pe]
        both, amask, bmask = self.groups
        ob = om[both]
        diag = np.full(self.n_free, shift)
        if self.mass is not None:
            if self.p < 2.0:
                qm = u * u + self.eps * self.eps
                diag = diag + (self.mass * self.p
                               * qm ** (0.5 * self.p - 1.0))[self.free_idx]
            else:
                diag = diag + kernels.phi_hess(u, self.mass, self.p,
                                               self.eps)[self.free_idx]
        data = np.concatenate([ob, ob, -ob, -ob, om[amask], om[bmask], diag])
        return csc_matrix((data, (self.rows, self.cols)),
                          shape=(self.n_free, self.n_free))

    def quadratic_matrix(self) -> Tuple[csc_matrix, np.ndarray]:
        # p = 2 normal equations with weights kappa (constant factors cancel)
        om = (self.g.eweights / self.g.lengths**2)[self.pe]
        both, amask, bmask = self.groups
        ob = om[both]
        diag = np.zeros(self.n_free)
        if self.mass is not None:
            diag += self.mass[self.free_idx]
        data = np.concatenate([ob, ob, -ob, -ob, om[amask], om[bmask], diag])
        mat = csc_matrix((data, (self.rows, self.cols)),
                         shape=(self.n_free, self.n_free))
        return mat, om

    def quadratic_rhs(self, om: np.ndarray, u: np.ndarray) -> np.ndarray:
        both, amask, bmask = self.groups
        b = np.zeros(self.n_free)
        rows_a, fixed_a = self.rhs_a
        rows_b, fixed_b = self.rhs_b
        np.add.at(b, rows_a, om[amask] * u[fixed_a])
        np.add.at(b, rows_b, om[bmask] * u[fixed_b])
        return b


def minimize_p_energy(
    g: MetricMeasureGraph,
    fixed,
    free: NodeSet,
    cfg: Optional[SolverConfig] = None,
    init: Optional[Union[DiscreteFunction, np.ndarray]] = None,
    mass: Optional[np.ndarray] = None,
) -> Tuple[DiscreteFunction, SolveDiagnostics]:
    """Minimize the pinned p-energy over the free node values.

    Parameters
    ----------
    fixed : mapping of node id to pinned value (or iterable of pairs).
    free : NodeSet of node ids free to move.  Nodes neither free nor
        pinned are pinned to 0.
    init : optional starting guess for the free values.
    mass : optional per-node coefficients adding ``sum m_x |u_x|^p`` to
        the objective (the Sobolev-capacity functional).
    """
    cfg = cfg or SolverConfig()
    fixed_idx, fixed_val = _fixed_arrays(g, fixed)
    free_idx = g.index_of(free.ids) if len(free) else np.empty(0, dtype=np.int64)
    if mass is not None:
        mass = np.asarray(mass, dtype=float)
        if mass.shape != (g.n_nodes,) or np.any(mass < 0):
            raise ValueError("mass must be a nonnegative per-node array")

    prob = _Pinned(g, fixed_idx, fixed_val, free_idx, cfg.p,
                   cfg.smoothing_eps, mass)

    init_vec = None
    if init is not None:
        init_vec = init.values if isinstance(init, DiscreteFunction) else \
            np.asarray(init, dtype=float)
        if init_vec.shape != (g.n_nodes,):
            raise ValueError("init must align with the node array")

    if prob.n_free == 0:
        u = prob.base_vector(None)
        e = prob.energy(u)
        diag = SolveDiagnostics(0, e, 0.0, [e], True)
        return DiscreteFunction(g, u), diag

    if cfg.p == 2.0 and not cfg.force_iterative:
        return _solve_direct(prob, cfg, init_vec)
    return _solve_newton(prob, cfg, init_vec)


def _solve_direct(prob: _Pinned, cfg: SolverConfig, init_vec):
    u = prob.base_vector(init_vec)
    e0 = prob.energy(u)
    mat, om = prob.quadratic_matrix()
    rhs = prob.quadratic_rhs(om, u)
    u_free = splu(mat).solve(rhs)
    u[prob.free_idx] = u_free
    e1 = prob.energy(u)
    gfree = prob.grad_free(u)
    kkt = float(np.abs(gfree).max()) / (1.0 + abs(e1)) if gfree.size else 0.0
    diag = SolveDiagnostics(1, e1, kkt, [e0, min(e0, e1)], True)
    return DiscreteFunction(prob.g, u), diag


def _warm_start(prob: _Pinned, cfg: SolverConfig) -> np.ndarray:
    mat, om = prob.quadratic_matrix()
    u = prob.base_vector(None)
    rhs = prob.quadratic_rhs(om, u)
    u[prob.free_idx] = splu(mat).solve(rhs)
    return u


def _model_step(prob: _Pinned, u: np.ndarray, gfree: np.ndarray) -> np.ndarray:
    """Solve the quadratic-model system, shifting the diagonal only if the
    factorization fails (flat regions at p > 2 make it singular)."""
    shift = 0.0
    for _ in range(6):
        try:
            delta = splu(prob.step_matrix(u, shift)).solve(-gfree)
        except RuntimeError:
            delta = None
        if delta is not None and np.all(np.isfinite(delta)):
            return delta
        shift = max(shift * 100.0, 1e-10 * (1.0 + float(np.abs(gfree).max())))
    return -gfree


def _solve_newton(prob: _Pinned, cfg: SolverConfig, init_vec):
    if init_vec is None:
        u = _warm_start(prob, cfg)
    else:
        u = prob.base_vector(init_vec)
    e = prob.energy(u)
    hist = [e]
    gfree = prob.grad_free(u)
    kkt = float(np.abs(gfree).max()) / (1.0 + abs(e))
    converged = kkt <= cfg.tol_kkt
    iterations = 0

    while not converged and iterations < cfg.max_iter:
        delta = _model_step(prob, u, gfree)
        slope = float(np.dot(gfree, delta))
        if slope >= 0.0:
            delta = -gfree
            slope = -float(np.dot(gfree, gfree))
            if slope == 0.0:
                break
        # Near the minimum the true decrease drops below the float
        # resolution of the energy sum; without the noise allowance the
        # line search rejects steps over +-1 ulp fluctuations and stalls.
        noise = 1e-14 * (1.0 + abs(e))
        alpha = 1.0
        accepted = False
        while alpha >= _MIN_STEP:
            u_try = u.copy()
            u_try[prob.free_idx] += alpha * delta
            e_try = prob.energy(u_try)
            if e_try <= e + _ARMIJO_C * alpha * slope + noise:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        u, e_prev, e = u_try, e, e_try
        hist.append(e)
        iterations += 1
        gfree = prob.grad_free(u)
        kkt = float(np.abs(gfree).max()) / (1.0 + abs(e))
        rel = (e_prev - e) / max(1.0, abs(e))
        if kkt <= cfg.tol_kkt and rel <= cfg.tol_energy:
            converged = True

    converged = converged or kkt <= cfg.tol_kkt
    diag = SolveDiagnostics(iterations, e, kkt, hist, bool(converged))
    return DiscreteFunction(prob.g, u), diag


# ---------------------------------------------------------------------------
# Poincare constant for functions vanishing outside a set

def poincare_constant(
    g: MetricMeasureGraph,
    e_set: NodeSet,
    p: float = 2.0,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[float, DiscreteFunction]:
    """Best constant in ``sum mu |u|^p <= C * energy_p(u)`` for ``u`` zero
    outside the set.

    For ``p == 2`` this is exact: ``1 / lambda_min`` of the generalized
    eigenproblem of the Dirichlet energy matrix against the mass matrix.
    For other ``p`` a certified lower bound is returned: the best Rayleigh
    quotient over a candidate family (the quadratic eigenfunction, a
    capacitary-type potential, and hat bumps).  In both cases the witness
    function is returned alongside the value.

    If some connected component lies entirely inside the set, constants do
    not see the complement and the value is ``inf`` (with the constant
    witness on that component).
    """
    if not (p >= 1):
        raise ValueError("exponent p must be >= 1")
    if e_set.is_empty:
        raise ValueError("the set must be nonempty")
    if not g.has_ids(e_set.ids):
        raise ValueError("the set references unknown node ids")

    n = g.n_nodes
    e_idx = np.sort(g.index_of(e_set.ids))
    inside = np.zeros(n, dtype=bool)
    inside[e_idx] = True
    labels = g.component_labels()
    outside_comps = set(labels[~inside].tolist())
    swallowed = [c for c in set(labels[inside].tolist()) if c not in outside_comps]
    if swallowed:
        vals = np.where(labels == swallowed[0], 1.0, 0.0)
        vals[~inside] = 0.0
        return math.inf, DiscreteFunction(g, vals)

    if p == 2.0:
        lam, vec = _dirichlet_ground_state(g, e_idx)
        vals = np.zeros(n)
        vals[e_idx] = vec
        return 1.0 / lam, DiscreteFunction(g, vals)

    cfg = cfg or SolverConfig(p=p)
    candidates = []
    _, eig_fun = poincare_constant(g, e_set, 2.0)
    candidates.append(eig_fun.values)
    candidates.append(_capacitary_candidate(g, e_idx, inside, p, cfg))
    candidates.extend(_hat_candidates(g, e_idx, inside))

    kappa = g.eweights / g.lengths**p
    best_q, best_u = -math.inf, None
    for vals in candidates:
        if vals is None or not np.any(vals):
            continue
        d = kernels.edge_diffs(vals, g.edge_a, g.edge_b)
        denom = kernels.phi_sum(d, kappa, p, 0.0)
        num = float(np.dot(g.measures, np.abs(vals) ** p))
        if denom <= 0.0:
            continue
        q = num / denom
        if q > best_q:
            best_q, best_u = q, vals
    if best_u is None:
        raise ValueError("no admissible candidate produced a finite quotient")
    return best_q, DiscreteFunction(g, best_u)


def _dirichlet_ground_state(g: MetricMeasureGraph, e_idx: np.ndarray):
    from scipy.sparse import coo_matrix
    from scipy.sparse.linalg import eigsh

    n = g.n_nodes
    kappa = g.eweights / g.lengths**2
    pos = np.full(n, -1, dtype=np.int64)
    pos[e_idx] = np.arange(e_idx.size)
    ia, ib = pos[g.edge_a], pos[g.edge_b]
    rows, cols, data = [], [], []
    both = (ia >= 0) & (ib >= 0)
    rows += [ia[both], ib[both], ia[both], ib[both]]
    cols += [ia[both], ib[both], ib[both], ia[both]]
    k = kappa[both]
    data += [k, k, -k, -k]
    for mask, side in (((ia >= 0) & (ib < 0), ia), ((ia < 0) & (ib >= 0), ib)):
        rows.append(side[mask])
        cols.append(side[mask])
        data.append(kappa[mask])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    a = coo_matrix((data, (rows, cols)), shape=(e_idx.size, e_idx.size)).tocsc()
    mdiag = g.measures[e_idx]
    if e_idx.size <= 2000:
        dense = a.toarray()
        w, v = scipy.linalg.eigh(dense, np.diag(mdiag), subset_by_index=[0, 0])
        return float(w[0]), v[:, 0]
    from scipy.sparse import diags

    w, v = eigsh(a, k=1, M=diags(mdiag).tocsc(), sigma=0, which="LM")
    return float(w[0]), v[:, 0]


def _capacitary_candidate(g, e_idx, inside, p, cfg):
    comp_ids = g.ids[~inside]
    if comp_ids.size == 0:
        return None
    dist = csgraph.dijkstra(g.length_matrix(), directed=False,
                            indices=np.nonzero(~inside)[0], min_only=True)
    peak = e_idx[np.argmax(dist[e_idx])]
    fixed = {int(g.ids[peak]): 1.0}
    fixed.update((int(i), 0.0) for i in comp_ids)
    free_ids = np.setdiff1d(g.ids[inside], [g.ids[peak]])
    free = NodeSet(free_ids, CLOSED, "poincare candidate")
    u, diag = minimize_p_energy(g, fixed, free, cfg)
    return u.values if diag.converged else None


def _hat_candidates(g, e_idx, inside, max_hats: int = 8):
    out = []
    if np.all(inside):
        return out
    dist_out = csgraph.dijkstra(g.length_matrix(), directed=False,
                                indices=np.nonzero(~inside)[0], min_only=True)
    take = e_idx[np.argsort(dist_out[e_idx])[::-1][:max_hats]]
    for center in take:
        rho = dist_out[center]
        if not (rho > 0):
            continue
        d = csgraph.dijkstra(g.length_matrix(), directed=False,
                             indices=center, min_only=True)
        vals = np.maximum(0.0, 1.0 - d / rho)
        vals[~inside] = 0.0
        if np.any(vals):
            out.append(vals)
    return out
