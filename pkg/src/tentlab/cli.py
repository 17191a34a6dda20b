"""Command-line entry point: ``tentlab <subcommand> ...``.

Every subcommand prints JSON lines (one record per measurement) to stdout;
``run`` and ``sweep`` also write a results directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .coefficients import KINDS, make_coefficient_field
from .duhamel import apply_operator
from .geometry import build_grid, build_time_grid
from .operator import assemble_operator, form_bounds
from .propagator import FAMILIES, fit_decay_order, propagator_for
from .tentspaces import (kenig_pipher_norm, load_field, make_atom, save_field, tent_norm, tinfty_norm,
                         weighted_l2)
from .harness.acceptance import check_identities, random_source
from .harness.config import ConfigError, load_config, packaged_config
from .harness.exponents import critical_exponents
from .harness.runner import read_records, run_experiment, to_jsonable

log = logging.getLogger("tentlab")


def _emit(rec: dict) -> None:
    print(json.dumps(to_jsonable(rec), sort_keys=True))


def _coefficients(args):
    grid = build_grid(args.dim, args.N, args.period)
    params = json.loads(args.params) if args.params else None
    return make_coefficient_field(grid, args.kind, params, args.seed)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_assemble(args) -> int:
    coeffs = _coefficients(args)
    op = assemble_operator(coeffs)
    rec = {"coefficients": coeffs.descriptor(), "lambda0": coeffs.lambda0, "lambda1": coeffs.lambda1,
           "real": coeffs.is_real, "size": op.size, "norm_1": float(np.linalg.norm(op.matrix, 1)),
           "form_bounds": form_bounds(op, seed=args.seed or 0)}
    if args.out:
        np.savez(args.out, matrix=op.matrix, coefficients=coeffs.matrices)
        rec["written"] = args.out
    _emit(rec)
    return 0


def cmd_decay(args) -> int:
    op = assemble_operator(_coefficients(args))
    times = _float_list(args.times)
    cache, _ = propagator_for(op, build_time_grid(min(times), max(times)))
    fit = fit_decay_order(cache, args.family, times, _float_list(args.separations), args.radius,
                          args.q, args.r, seed=args.seed or 0)
    _emit(fit.to_record())
    return 0


def cmd_norm(args) -> int:
    f = load_field(args.field)
    if args.kind == "tent":
        rep = tent_norm(f, args.p, args.beta, args.m, args.alpha).to_record()
    elif args.kind == "tinfty":
        rep = tinfty_norm(f, args.beta, args.m, args.sigma).to_record()
    elif args.kind == "kenig_pipher":
        rep = kenig_pipher_norm(f, args.p, args.beta).to_record()
    else:
        rep = {"norm_kind": "weighted_l2", "params": {"beta": args.beta}, "value": weighted_l2(f, args.beta)}
    rep["field"] = str(args.field)
    _emit(rep)
    return 0


def cmd_solve(args) -> int:
    coeffs = _coefficients(args)
    cache, tg = propagator_for(assemble_operator(coeffs), build_time_grid(args.t_min, args.t_max))
    grid = coeffs.grid
    if args.source == "atom":
        center = tuple([grid.N // 2] * grid.dim)
        f, info = make_atom(grid, tg, center, args.radius, args.p, args.beta, seed=args.seed,
                            profile=args.profile)
    else:
        f, info = random_source(grid, tg, np.random.default_rng(args.seed)), {"kind": "random"}
    sol = apply_operator(cache, args.operator, f)
    save_field(args.out, sol.u)
    if args.source_out:
        save_field(args.source_out, f)
    _emit({"operator": args.operator, "coefficients": coeffs.descriptor(), "time_grid": tg.descriptor(),
           "source": info, "written": args.out, "flags": sol.flags})
    return 0


def cmd_verify(args) -> int:
    recs = check_identities({"N": args.N, "fields": args.fields, "sources_per_field": args.sources,
                             "tol": args.tol}, args.seed)
    for r in recs:
        if args.all or r["kind"] == "summary":
            _emit(r)
    return 0 if recs[-1]["passed"] else 1


def _load(args) -> dict:
    path = args.config or packaged_config("acceptance")
    return load_config(path)


def _print_summaries(result) -> None:
    for name, rec in result.summaries.items():
        print(f"{'PASS' if rec['passed'] else 'FAIL'} {name}", file=sys.stderr)


def cmd_run(args) -> int:
    config = _load(args)
    result = run_experiment(config, out_dir=args.out, workers=args.workers)
    _print_summaries(result)
    print(json.dumps({"out_dir": str(result.out_dir), "passed": result.passed, "timings": result.timings}))
    return 0 if result.passed else 1


def cmd_sweep(args) -> int:
    config = _load(args)
    if args.force:
        config["force"] = True
    config["checks"] = {"sweep": config["checks"].get("sweep", {})}
    result = run_experiment(config, out_dir=args.out, workers=args.workers)
    _print_summaries(result)
    print(json.dumps({"out_dir": str(result.out_dir), "passed": result.passed}))
    return 0 if result.passed else 1


def cmd_report(args) -> int:
    if args.exponents:
        n, m, M, q, beta, kappa, pm = args.exponents
        _emit(critical_exponents(n, m, M, q, beta, kappa, pm).to_record())
        return 0
    if not args.results:
        raise SystemExit("report needs a results directory or --exponents")
    rows = [r for r in read_records(args.results) if r.get("kind") == "summary"]
    width = max((len(r["check"]) for r in rows), default=5)
    for r in rows:
        extra = {k: v for k, v in r.items() if k not in ("check", "kind", "passed", "config_hash", "seed", "version")}
        print(f"{r['check']:<{width}}  {'PASS' if r['passed'] else 'FAIL'}  {json.dumps(extra, sort_keys=True)}")
    return 0


def _grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--N", type=int, default=128)
    p.add_argument("--period", type=float, default=1.0)
    p.add_argument("--kind", choices=KINDS, default="identity")
    p.add_argument("--params", help="coefficient parameters as JSON")
    p.add_argument("--seed", type=int, default=0)


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config (default: the packaged acceptance config)")
    p.add_argument("--out", help="results directory (default: $TENTLAB_OUTPUT_DIR or the config)")
    p.add_argument("--workers", type=int, help="worker processes (default: $TENTLAB_WORKERS or the config)")


def _exponent(text: str):
    return math.inf if text.lower() in ("inf", "infinity") else text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tentlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assemble", help="assemble L for a coefficient field and report its constants")
    _grid_args(p)
    p.add_argument("--out", help="write matrix and coefficients to this .npz")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("decay", help="fit the off-diagonal decay order of a semigroup family")
    _grid_args(p)
    p.add_argument("--family", choices=FAMILIES, default="semigroup")
    p.add_argument("--times", default="0.001,0.01,0.1")
    p.add_argument("--separations", default="0.1,0.2,0.3,0.4")
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--r", type=float, default=2.0)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("norm", help="evaluate a norm of a field stored in .npz")
    p.add_argument("field", type=Path)
    p.add_argument("--kind", choices=["tent", "tinfty", "kenig_pipher", "weighted_l2"], default="tent")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("solve", help="apply L1, Lhalf or L0 to a source and export the field")
    _grid_args(p)
    p.add_argument("--operator", choices=["L1", "Lhalf", "L0"], default="L1")
    p.add_argument("--source", choices=["atom", "random"], default="atom")
    p.add_argument("--t-min", type=float, default=1e-4)
    p.add_argument("--t-max", type=float, default=0.04)
    p.add_argument("--radius", type=float, default=0.15)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--profile", choices=["noise", "smooth"], default="smooth")
    p.add_argument("--out", required=True, help="output .npz for the solution")
    p.add_argument("--source-out", help="also write the source field")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="exact discrete identities on random instances")
    p.add_argument("--N", type=int, default=128)
    p.add_argument("--fields", type=int, default=4)
    p.add_argument("--sources", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--all", action="store_true", help="print every instance, not only the summary")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="boundedness sweep of a config across its grids")
    _run_args(p)
    p.add_argument("--force", action="store_true", help="run inadmissible (p, beta) pairs too")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="run every check of a config")
    _run_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a results directory or print critical exponents")
    p.add_argument("results", nargs="?", type=Path)
    p.add_argument("--exponents", nargs=7, type=_exponent, metavar=("n", "m", "M", "q", "beta", "kappa", "p_minus"),
                   help="n m M q beta kappa p_minus (rationals or inf)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"tentlab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
