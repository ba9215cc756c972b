"""Timing comparison of the compiled edge kernels against the NumPy fallback.

Run from the repository root after an editable install:

    python3 benchmarks/bench_kernels.py [--sizes 1e4,1e5,1e6] [--repeats 7]

Prints one table per kernel with the best-of-N wall time for each backend
and the speedup ratio.  The two implementations are imported directly so
the comparison does not depend on which one ``varcap.kernels`` selected.
"""

import argparse
import timeit

import numpy as np

from varcap import _kernels_np

try:
    from varcap import _ckern
except ImportError:
    _ckern = None


def make_args(n_edges: int, rng: np.random.Generator):
    n_nodes = max(2, n_edges // 4)
    u = rng.normal(size=n_nodes)
    ea = rng.integers(0, n_nodes, size=n_edges).astype(np.int64)
    eb = (ea + 1 + rng.integers(0, n_nodes - 1, size=n_edges)) % n_nodes
    eb = eb.astype(np.int64)
    d = rng.normal(size=n_edges)
    kappa = rng.uniform(0.5, 2.0, size=n_edges)
    inv_len = rng.uniform(0.5, 4.0, size=n_edges)
    return {
        "edge_diffs": lambda m: m.edge_diffs(u, ea, eb),
        "edge_gradients": lambda m: m.edge_gradients(u, ea, eb, inv_len),
        "phi_sum": lambda m: m.phi_sum(d, kappa, 1.5, 1e-9),
        "phi_grad": lambda m: m.phi_grad(d, kappa, 3.0, 0.0),
        "phi_hess": lambda m: m.phi_hess(d, kappa, 3.0, 0.0),
        "scatter_signed": lambda m: m.scatter_signed(d, ea, eb, n_nodes),
        "weighted_power_sum": lambda m: m.weighted_power_sum(kappa, d, 2.5),
    }


def best_time(fn, repeats: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1e4,1e5,1e6")
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()
    sizes = [int(float(s)) for s in args.sizes.split(",")]

    if _ckern is None:
        print("compiled extension not importable; timing the fallback only")
    rng = np.random.default_rng(0)
    for n in sizes:
        calls = make_args(n, rng)
        print(f"\nedges = {n:,}")
        print(f"{'kernel':<20} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
        for name, call in calls.items():
            t_np = best_time(lambda: call(_kernels_np), args.repeats)
            if _ckern is None:
                print(f"{name:<20} {t_np * 1e3:>10.3f}ms {'-':>12} {'-':>9}")
                continue
            ref = call(_kernels_np)
            got = call(_ckern)
            # reduction order differs between the two implementations
            np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-12)
            t_c = best_time(lambda: call(_ckern), args.repeats)
            print(f"{name:<20} {t_np * 1e3:>10.3f}ms {t_c * 1e3:>10.3f}ms "
                  f"{t_np / t_c:>8.2f}x")


if __name__ == "__main__":
    main()
