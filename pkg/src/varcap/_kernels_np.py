"""NumPy implementations of the edge-local kernels.

These are the fallback used when the compiled extension ``varcap._ckern``
is unavailable or disabled.  Semantics match the compiled versions; only
the rounding of the reductions may differ in the last ulp (NumPy sums
pairwise, the compiled loops sum sequentially).

``phi`` below is the solver's edge penalty: ``phi(t) = |t|^p`` when
``eps == 0`` and the regularized ``(t^2 + eps^2)^(p/2) - eps^p`` otherwise.
"""

from __future__ import annotations

import numpy as np


def edge_diffs(u, ea, eb):
    return u[ea] - u[eb]


def edge_gradients(u, ea, eb, inv_len):
    out = np.abs(u[ea] - u[eb])
    out *= inv_len
    return out


def weighted_power_sum(w, g, p):
    return float(np.dot(w, np.abs(g) ** p))


def phi_sum(d, kappa, p, eps):
    if eps == 0.0:
        return float(np.dot(kappa, np.abs(d) ** p))
    q = d * d + eps * eps
    return float(np.dot(kappa, q ** (0.5 * p) - eps**p))


def phi_grad(d, kappa, p, eps):
    # d/dt of phi: p * t * (t^2 + eps^2)^(p/2 - 1); the eps == 0, t == 0
    # corner would be 0 * inf for p < 2, so it is masked explicitly.
    if eps == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = p * np.sign(d) * np.abs(d) ** (p - 1.0)
        out[d == 0.0] = 0.0
    else:
        q = d * d + eps * eps
        out = p * d * q ** (0.5 * p - 1.0)
    return kappa * out


def phi_hess(d, kappa, p, eps):
    # Second derivative p*(t^2+eps^2)^(p/2-2) * ((p-1) t^2 + eps^2); always
    # nonnegative for p >= 1.  Callers must pass eps > 0 when p < 2.
    if eps == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = p * (p - 1.0) * np.abs(d) ** (p - 2.0)
        if p >= 2.0:
            out[d == 0.0] = 0.0 if p > 2.0 else p * (p - 1.0)
        else:
            raise ValueError("phi_hess requires eps > 0 for p < 2")
    else:
        q = d * d + eps * eps
        out = p * q ** (0.5 * p - 2.0) * ((p - 1.0) * d * d + eps * eps)
    return kappa * out


def scatter_signed(vals, ea, eb, n):
    out = np.zeros(n)
    np.add.at(out, ea, vals)
    np.subtract.at(out, eb, vals)
    return out
