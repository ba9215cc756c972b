"""Command-line front end.

Subcommands: ``build-space``, ``cap``, ``sobcap``, ``tilde``,
``outer-profile``, ``oracle``, ``verify``, ``example``, ``converge``.

Exit codes: 0 success, 1 validation error, 2 solver non-convergence,
3 failed property check.  Results are printed as JSON (sorted keys) to
stdout or written to ``--out``; identical invocations produce identical
bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

from . import fixtures as fx
from .capacity import (
    outer_capacity_profile,
    path_capacity_oracle,
    radial_condenser_oracle,
    sobolev_capacity,
    tilde_capacity,
    variational_capacity,
)
from .properties import (
    check_capacity_axioms,
    convergence_study,
    example_spec,
    run_paper_example,
)
from .solver import SolverConfig
from .space import build_grid, load_space, parse_predicate, resolve_set, save_space

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CHECK_FAILED = 3

_P1_BAND = 1e-6

SET_ALIASES = {
    "inner7": {"box": {"lo": [0.125, 0.125], "hi": [0.875, 0.875]}},
}


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _solver_flags(sub):
    sub.add_argument("--p", type=float, default=2.0)
    sub.add_argument("--tol-energy", type=float, default=1e-10)
    sub.add_argument("--tol-kkt", type=float, default=1e-8)
    sub.add_argument("--max-iter", type=int, default=10000)
    sub.add_argument("--eps-reg", type=float, default=1e-12)


def _build_parser() -> _Parser:
    parser = _Parser(prog="varcap",
                     description="condenser capacities on weighted graphs")
    subs = parser.add_subparsers(dest="cmd")

    sp = subs.add_parser("build-space", help="rasterize a domain to a space file")
    sp.add_argument("--fixture", help="named fixture instead of a domain")
    sp.add_argument("--domain", help="geometric predicate (JSON or file)")
    sp.add_argument("--h", type=float, help="lattice spacing")
    sp.add_argument("--weight", default=None,
                    help="weight field: number or JSON spec")
    sp.add_argument("--out", help="output file (stdout if omitted)")

    for name in ("cap", "sobcap", "tilde", "outer-profile"):
        sub = subs.add_parser(name)
        sub.add_argument("--space", help="space file")
        sub.add_argument("--A", required=True, help="set spec: JSON, file, or alias")
        if name != "sobcap":
            sub.add_argument("--E", required=True,
                             help="set spec: JSON, file, or alias")
        _solver_flags(sub)
        sub.add_argument("--out")
        sub.add_argument("--potential-out",
                         help="write the extremal potential values here")
        if name in ("tilde", "outer-profile"):
            sub.add_argument("--eps-schedule",
                             help="comma-separated decreasing radii")

    orc = subs.add_parser("oracle", help="closed-form reference values")
    orc.add_argument("--kind", required=True, choices=["path", "radial"])
    orc.add_argument("--p", type=float, required=True)
    orc.add_argument("--weights", help="path: comma-separated edge weights")
    orc.add_argument("--r", type=float, help="radial: inner radius")
    orc.add_argument("--R", type=float, help="radial: outer radius")
    orc.add_argument("--dim", type=int, default=2, help="radial: dimension")
    orc.add_argument("--weight", default=None,
                     help="radial: number or JSON weight spec")
    orc.add_argument("--out")

    ver = subs.add_parser("verify", help="run the capacity axiom suite")
    ver.add_argument("--space", required=True)
    ver.add_argument("--E", required=True)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--n", type=int, default=20)
    _solver_flags(ver)
    ver.add_argument("--format", choices=["json", "csv"], default="json")
    ver.add_argument("--out")

    exa = subs.add_parser("example", help="run a refinement experiment")
    exa.add_argument("--name", required=True)
    exa.add_argument("--h-schedule")
    exa.add_argument("--p", type=float)
    exa.add_argument("--tol-energy", type=float, default=1e-10)
    exa.add_argument("--tol-kkt", type=float, default=1e-8)
    exa.add_argument("--max-iter", type=int, default=10000)
    exa.add_argument("--eps-reg", type=float, default=1e-12)
    exa.add_argument("--format", choices=["json", "csv"], default="json")
    exa.add_argument("--out")
    exa.add_argument("--plot-data", help="write per-check plot series here")

    cnv = subs.add_parser("converge", help="mesh-refinement error study")
    cnv.add_argument("--fixture", required=True)
    cnv.add_argument("--h-schedule", required=True)
    _solver_flags(cnv)
    cnv.add_argument("--weight", default=None)
    cnv.add_argument("--dim", type=int, default=2)
    cnv.add_argument("--format", choices=["json", "csv"], default="json")
    cnv.add_argument("--out")
    cnv.add_argument("--plot-data")

    return parser


# ---------------------------------------------------------------------------
# argument helpers

def _effective_p(p: float) -> float:
    if p < 1.0:
        raise ValueError("exponent p must be >= 1")
    if p < 1.0 + _P1_BAND:
        print("note: p in [1, 1+1e-6) runs in eps-regularized p=1 mode; "
              "uniqueness is not guaranteed", file=sys.stderr)
        return 1.0
    return p


def _config(args) -> SolverConfig:
    p = _effective_p(args.p)
    eps = args.eps_reg
    if p < 1.0 + _P1_BAND:
        eps = max(eps, 1e-8)
    return SolverConfig(p=p, tol_energy=args.tol_energy,
                        tol_kkt=args.tol_kkt, max_iter=args.max_iter,
                        epsilon_reg=eps)


def _parse_json_or_file(text: str):
    stripped = text.strip()
    if stripped.startswith(("{", "[")):
        return json.loads(stripped)
    if os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    raise ValueError(f"not inline JSON and no such file: {text!r}")


def _set_spec(text: str):
    if text in SET_ALIASES:
        return SET_ALIASES[text]
    return _parse_json_or_file(text)


def _parse_schedule(text: str):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValueError(f"malformed schedule {text!r}")
    if not vals:
        raise ValueError("schedule must be nonempty")
    return vals


def _parse_weight(text):
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        return _parse_json_or_file(text)


def _emit(doc: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(doc)
    else:
        sys.stdout.write(doc)


def _emit_json(doc: dict, out_path) -> None:
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", out_path)


def _list_ids(spec):
    if isinstance(spec, dict) and set(spec) <= {"list", "open"} and "list" in spec:
        return spec["list"]
    return None


def _load_sets(args, need_e: bool):
    """Parse A (and E), enforcing the inclusion check that is possible
    without a space, then resolve against the loaded space."""
    a_spec = _set_spec(args.A)
    e_spec = _set_spec(args.E) if need_e else None
    if args.space is None:
        a_ids, e_ids = _list_ids(a_spec), _list_ids(e_spec)
        if need_e and a_ids is not None and e_ids is not None \
                and not set(a_ids) <= set(e_ids):
            raise ValueError("A not contained in E")
        raise ValueError("--space is required")
    g = load_space(args.space)
    a = resolve_set(g, a_spec)
    e = resolve_set(g, e_spec) if need_e else None
    return g, a, e


def _write_potential(result, path) -> None:
    if path and result.potential is not None:
        with open(path, "w") as fh:
            json.dump([float(v) for v in result.potential.values], fh)
            fh.write("\n")


def _report_exit(report, args) -> int:
    if args.format == "csv":
        _emit(report.to_csv(), args.out)
    else:
        _emit(report.to_json(), args.out)
    plot_path = getattr(args, "plot_data", None)
    if plot_path:
        with open(plot_path, "w") as fh:
            json.dump(report.plot_series, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return EXIT_OK if report.all_pass else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# subcommand bodies

def _cmd_build_space(args) -> int:
    if args.fixture:
        f = fx.build_fixture(args.fixture, args.h)
        g = f.g
    else:
        if not args.domain or args.h is None:
            raise ValueError("build-space needs --fixture or --domain with --h")
        pred = parse_predicate(_parse_json_or_file(args.domain))
        g = build_grid(pred, args.h, _parse_weight(args.weight))
    if args.out:
        save_space(g, args.out)
    else:
        sys.stdout.write(json.dumps(g.to_dict(), sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_cap(args) -> int:
    g, a, e = _load_sets(args, need_e=True)
    cfg = _config(args)
    result = variational_capacity(g, a, e, cfg.p, cfg)
    _write_potential(result, args.potential_out)
    _emit_json(result.to_json_dict(args.potential_out), args.out)
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _cmd_sobcap(args) -> int:
    g, a, _ = _load_sets(args, need_e=False)
    cfg = _config(args)
    result = sobolev_capacity(g, a, cfg.p, cfg)
    _write_potential(result, args.potential_out)
    _emit_json(result.to_json_dict(args.potential_out), args.out)
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _cmd_tilde(args) -> int:
    g, a, e = _load_sets(args, need_e=True)
    cfg = _config(args)
    family = None
    if args.eps_schedule:
        from .capacity import default_tilde_family

        family = default_tilde_family(g, a, e,
                                      _parse_schedule(args.eps_schedule))
    result = tilde_capacity(g, a, e, cfg.p, family, cfg)
    _write_potential(result, args.potential_out)
    doc = result.to_json_dict(args.potential_out)
    if math.isinf(result.value):
        doc["value"] = "inf"
    _emit_json(doc, args.out)
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _cmd_outer_profile(args) -> int:
    g, a, e = _load_sets(args, need_e=True)
    cfg = _config(args)
    if args.eps_schedule:
        schedule = _parse_schedule(args.eps_schedule)
    else:
        base = g.min_edge_length
        schedule = [4.0 * base, 2.0 * base, 0.45 * base]
    profile = outer_capacity_profile(g, a, e, cfg.p, schedule, cfg)
    converged = all(r.converged for r in profile.results)
    _emit_json({"eps": profile.eps, "values": profile.values,
                "limit": profile.limit, "converged": converged}, args.out)
    return EXIT_OK if converged else EXIT_NO_CONVERGENCE


def _cmd_oracle(args) -> int:
    if args.p <= 1.0:
        raise ValueError("oracle formulas need p > 1")
    if args.kind == "path":
        if not args.weights:
            raise ValueError("path oracle needs --weights")
        value = path_capacity_oracle(_parse_schedule(args.weights), args.p)
    else:
        if args.r is None or args.R is None:
            raise ValueError("radial oracle needs --r and --R")
        value = radial_condenser_oracle(args.r, args.R, args.p, args.dim,
                                        _parse_weight(args.weight))
    _emit(f"{value:.12g}\n", args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    g = load_space(args.space)
    e = resolve_set(g, _set_spec(args.E))
    cfg = _config(args)
    report = check_capacity_axioms(g, e, cfg.p, n_instances=args.n,
                                   seed=args.seed, cfg=cfg)
    return _report_exit(report, args)


def _cmd_example(args) -> int:
    schedule = _parse_schedule(args.h_schedule) if args.h_schedule else None
    p = _effective_p(args.p) if args.p is not None else None
    spec = example_spec(args.name, schedule, p)
    cfg = replace(_config_default(args), p=spec.p)
    report = run_paper_example(spec, cfg)
    return _report_exit(report, args)


def _config_default(args) -> SolverConfig:
    return SolverConfig(p=2.0, tol_energy=args.tol_energy,
                        tol_kkt=args.tol_kkt, max_iter=args.max_iter,
                        epsilon_reg=args.eps_reg)


def _cmd_converge(args) -> int:
    cfg = _config(args)
    report = convergence_study(args.fixture,
                               _parse_schedule(args.h_schedule), cfg.p,
                               cfg=cfg, weight=_parse_weight(args.weight),
                               n=args.dim)
    return _report_exit(report, args)


_DISPATCH = {
    "build-space": _cmd_build_space,
    "cap": _cmd_cap,
    "sobcap": _cmd_sobcap,
    "tilde": _cmd_tilde,
    "outer-profile": _cmd_outer_profile,
    "oracle": _cmd_oracle,
    "verify": _cmd_verify,
    "example": _cmd_example,
    "converge": _cmd_converge,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.cmd is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return _DISPATCH[args.cmd](args)
    except (_CliError, ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
