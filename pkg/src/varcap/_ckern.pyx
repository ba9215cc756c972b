# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled edge-local kernels.

Mirrors varcap._kernels_np function for function; see that module for the
definitions.  Reductions here are sequential in edge order.
"""

from libc.math cimport fabs, pow

import numpy as np


def edge_diffs(const double[::1] u, const long long[::1] ea, const long long[::1] eb):
    cdef Py_ssize_t m = ea.shape[0], e
    out = np.empty(m)
    cdef double[::1] ov = out
    for e in range(m):
        ov[e] = u[ea[e]] - u[eb[e]]
    return out


def edge_gradients(const double[::1] u, const long long[::1] ea, const long long[::1] eb,
                   const double[::1] inv_len):
    cdef Py_ssize_t m = ea.shape[0], e
    out = np.empty(m)
    cdef double[::1] ov = out
    for e in range(m):
        ov[e] = fabs(u[ea[e]] - u[eb[e]]) * inv_len[e]
    return out


def weighted_power_sum(const double[::1] w, const double[::1] g, double p):
    cdef Py_ssize_t m = w.shape[0], e
    cdef double acc = 0.0
    for e in range(m):
        acc += w[e] * pow(fabs(g[e]), p)
    return acc


def phi_sum(const double[::1] d, const double[::1] kappa, double p, double eps):
    cdef Py_ssize_t m = d.shape[0], e
    cdef double acc = 0.0, ep = 0.0, q
    if eps == 0.0:
        for e in range(m):
            acc += kappa[e] * pow(fabs(d[e]), p)
    else:
        ep = pow(eps, p)
        for e in range(m):
            q = d[e] * d[e] + eps * eps
            acc += kappa[e] * (pow(q, 0.5 * p) - ep)
    return acc


def phi_grad(const double[::1] d, const double[::1] kappa, double p, double eps):
    cdef Py_ssize_t m = d.shape[0], e
    cdef double q
    out = np.empty(m)
    cdef double[::1] ov = out
    if eps == 0.0:
        for e in range(m):
            if d[e] == 0.0:
                ov[e] = 0.0
            elif d[e] > 0.0:
                ov[e] = kappa[e] * p * pow(d[e], p - 1.0)
            else:
                ov[e] = -kappa[e] * p * pow(-d[e], p - 1.0)
    else:
        for e in range(m):
            q = d[e] * d[e] + eps * eps
            ov[e] = kappa[e] * p * d[e] * pow(q, 0.5 * p - 1.0)
    return out


def phi_hess(const double[::1] d, const double[::1] kappa, double p, double eps):
    cdef Py_ssize_t m = d.shape[0], e
    cdef double q
    out = np.empty(m)
    cdef double[::1] ov = out
    if eps == 0.0:
        if p < 2.0:
            raise ValueError("phi_hess requires eps > 0 for p < 2")
        for e in range(m):
            if d[e] == 0.0:
                ov[e] = kappa[e] * (p * (p - 1.0) if p == 2.0 else 0.0)
            else:
                ov[e] = kappa[e] * p * (p - 1.0) * pow(fabs(d[e]), p - 2.0)
    else:
        for e in range(m):
            q = d[e] * d[e] + eps * eps
            ov[e] = kappa[e] * p * pow(q, 0.5 * p - 2.0) * \
                ((p - 1.0) * d[e] * d[e] + eps * eps)
    return out


def scatter_signed(const double[::1] vals, const long long[::1] ea, const long long[::1] eb,
                   Py_ssize_t n):
    cdef Py_ssize_t m = vals.shape[0], e
    out = np.zeros(n)
    cdef double[::1] ov = out
    for e in range(m):
        ov[ea[e]] += vals[e]
        ov[eb[e]] -= vals[e]
    return out
