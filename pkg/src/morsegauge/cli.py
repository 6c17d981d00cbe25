"""Command line front end.

Outputs are byte-reproducible: JSON is dumped with sorted keys, CSV floats
go through '%.17g', rows follow the (fn, eps, trial) order of the request,
and nothing records wall-clock time.  Exit codes: 0 on success, 2 when a
certified bound or family check fails, 3 when refinement cannot reach the
requested tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import lusin_compact_set
from .corpus import corpus_function, corpus_names
from .errors import (BoundViolated, DepthExceeded, NotPiecewise,
                     ToleranceUnreachable, TubeInfeasible)
from .gauge import GaugeBuildParams, build_gauge, worker_count
from .geometry import NormKind
from .measure import RadonMeasure
from .partition import sabotage_offcenter, sabotage_overlap
from .riemann import verify_corollary, verify_theorem

_LAMBDA_CHOICES = ("1", "sqrt2", "sqrt3")
_SABOTAGE_CHOICES = ("inflate-delta", "overlap-cells", "offcenter-tags")


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _resolve_norms(args, dim: int) -> tuple[NormKind, float]:
    if args.lam is None:
        dn = NormKind.TWO
    elif args.lam == "1":
        dn = NormKind.INF
    else:
        need = {"sqrt2": 2, "sqrt3": 3}[args.lam]
        if dim != need:
            raise SystemExit(
                f"--lambda {args.lam} needs a {need}-d integrand, "
                f"got {dim}-d")
        dn = NormKind.TWO
    from .geometry import norm_ratio
    return dn, norm_ratio(NormKind.INF, dn, dim)


def _load_function(args):
    ynorm = {"1": NormKind.ONE, "2": NormKind.TWO,
             "inf": NormKind.INF}[args.ynorm]
    f = corpus_function(args.fn, y_norm=ynorm)
    if args.dim is not None and args.dim != f.dim_in:
        raise SystemExit(
            f"--dim {args.dim} does not match {args.fn} ({f.dim_in}-d)")
    return f


def _measure_for(f, density: str | None) -> RadonMeasure:
    if density is None:
        return RadonMeasure.unit(f.universe)
    return RadonMeasure.from_file(f.universe, density)


def _sabotage_hooks(mode: str | None):
    if mode is None:
        return None, None
    if mode == "inflate-delta":
        return (lambda g: g.scaled(2.0, note="sabotage inflate-delta")), None
    if mode == "overlap-cells":
        return None, sabotage_overlap
    return None, sabotage_offcenter


def _run_theorem_one(f, mu, eps, args, dn):
    gauge_hook, family_hook = _sabotage_hooks(args.sabotage)
    return verify_theorem(
        f, mu, eps, trials=args.trials, seed=args.seed, domain_norm=dn,
        max_depth=args.max_depth, eta=args.eta,
        _gauge_hook=gauge_hook, _family_hook=family_hook)


def cmd_run_theorem(args) -> int:
    f = _load_function(args)
    mu = _measure_for(f, args.density)
    dn, lam = _resolve_norms(args, f.dim_in)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    jobs = list(args.eps)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(
            lambda e: _run_theorem_one(f, mu, e, args, dn), jobs))

    rows = []
    payload = {"command": "run-theorem", "fn": f.name,
               "ynorm": args.ynorm, "lambda": lam,
               "eps": jobs, "trials": args.trials, "seed": args.seed,
               "sabotage": args.sabotage, "results": []}
    for eps, reports in zip(jobs, results):
        for r in reports:
            payload["results"].append(r.to_dict())
            rows.append([f.name, args.ynorm, lam, eps, r.trial, r.cell_count,
                         r.residual_measure, r.l1_partition,
                         r.l1_partition_error, r.residual_abs, r.l1_total,
                         r.local_error_sum, r.truncation_error,
                         r.truncation_index, int(r.ok())])
    _write_json(out / "report.json", payload)
    _write_csv(out / "summary.csv",
               ["fn", "ynorm", "lambda", "eps", "trial", "cells",
                "residual_measure", "l1_partition", "l1_partition_error",
                "residual_abs", "l1_total", "local_error_sum",
                "truncation_error", "truncation_index", "ok"],
               rows)
    for eps, reports in zip(jobs, results):
        worst = max(r.l1_total for r in reports)
        print(f"{f.name} eps={_fmt(eps)}: {len(reports)} trials ok, "
              f"worst l1 {_fmt(worst)}")
    return 0


def cmd_run_corollary(args) -> int:
    f = _load_function(args)
    mu = _measure_for(f, args.density)
    dn, lam = _resolve_norms(args, f.dim_in)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    jobs = list(args.eps)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(
            lambda e: verify_corollary(f, mu, e, seed=args.seed,
                                       domain_norm=dn), jobs))

    rows = []
    payload = {"command": "run-corollary", "fn": f.name,
               "ynorm": args.ynorm, "lambda": lam, "eps": jobs,
               "seed": args.seed, "results": []}
    for eps, rep in zip(jobs, results):
        payload["results"].append(rep.to_dict())
        rows.append([f.name, eps, rep.riemann_gap, rep.abs_total,
                     rep.worst_family_mass, rep.witness_mass,
                     rep.reconstruction_gap, int(rep.ok())])
        print(f"{f.name} eps={_fmt(eps)}: corollary ok, "
              f"riemann gap {_fmt(rep.riemann_gap)}")
    _write_json(out / "report.json", payload)
    _write_csv(out / "summary.csv",
               ["fn", "eps", "riemann_gap", "abs_total", "worst_family_mass",
                "witness_mass", "reconstruction_gap", "ok"],
               rows)
    return 0


def cmd_run_lusin(args) -> int:
    f = _load_function(args)
    mu = _measure_for(f, args.density)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    payload = {"command": "run-lusin", "fn": f.name, "eps": list(args.eps),
               "results": []}
    for eps in args.eps:
        K = lusin_compact_set(f, f.universe, eps, mu)
        payload["results"].append({
            "eps": eps,
            "pieces": [[list(b.lo), list(b.hi)] for b in K.pieces],
            "separation": K.separation,
            "omitted_measure": K.omitted_measure})
        rows.append([f.name, eps, len(K.pieces), K.separation,
                     K.omitted_measure])
        print(f"{f.name} eps={_fmt(eps)}: {len(K.pieces)} pieces, "
              f"omitted {_fmt(K.omitted_measure)}")
    _write_json(out / "report.json", payload)
    _write_csv(out / "summary.csv",
               ["fn", "eps", "pieces", "separation", "omitted_measure"],
               rows)
    return 0


def cmd_lebesgue_map(args) -> int:
    f = _load_function(args)
    mu = _measure_for(f, args.density)
    dn, lam = _resolve_norms(args, f.dim_in)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    eps = args.eps[0]
    g = build_gauge(f, mu, GaugeBuildParams(eps=eps, domain_norm=dn))
    n = args.grid
    axes = [np.linspace(lo, hi, n, endpoint=False) + (hi - lo) / (2 * n)
            for lo, hi in zip(f.universe.lo, f.universe.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    deltas = g.delta_batch(X)

    header = [f"x{k}" for k in range(f.dim_in)] + ["delta"]
    rows = [[*(float(c) for c in X[i]), float(deltas[i])]
            for i in range(len(X))]
    _write_csv(out / "lebesgue_map.csv", header, rows)
    _write_json(out / "report.json",
                {"command": "lebesgue-map", "fn": f.name, "eps": eps,
                 "grid": n, "lambda": lam,
                 "delta_min": float(deltas.min()),
                 "delta_max": float(deltas.max()),
                 "provenance": g.provenance})
    print(f"{f.name} eps={_fmt(eps)}: delta in "
          f"[{_fmt(float(deltas.min()))}, {_fmt(float(deltas.max()))}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="morsegauge",
        description="Gauge-fine partitions and certified Riemann sums for "
                    "a corpus of vector-valued integrands.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, sabotage=False):
        p.add_argument("--fn", required=True, choices=corpus_names())
        p.add_argument("--dim", type=int, default=None,
                       help="expected input dimension (validated)")
        p.add_argument("--ynorm", choices=("1", "2", "inf"), default="2")
        p.add_argument("--eps", type=float, action="append",
                       help="target accuracy; repeatable")
        p.add_argument("--lambda", dest="lam", choices=_LAMBDA_CHOICES,
                       default=None,
                       help="regularity constant of the cover family")
        p.add_argument("--eta", type=float, default=None,
                       help="residual measure target (default from eps)")
        p.add_argument("--max-depth", type=int, default=None)
        p.add_argument("--trials", type=int, default=5)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--density", default=None,
                       help="density grid file (json or csv); default uniform")
        p.add_argument("--out", default="out")
        if sabotage:
            p.add_argument("--sabotage", choices=_SABOTAGE_CHOICES,
                           default=None)

    pt = sub.add_parser("run-theorem", help="certify the approximation chain")
    common(pt, sabotage=True)
    pt.set_defaults(func=cmd_run_theorem)

    pc = sub.add_parser("run-corollary", help="certify the set-function form")
    common(pc)
    pc.set_defaults(func=cmd_run_corollary)

    pl = sub.add_parser("run-lusin", help="compact near-continuity set")
    common(pl)
    pl.set_defaults(func=cmd_run_lusin)

    pm = sub.add_parser("lebesgue-map", help="tabulate the gauge on a grid")
    common(pm)
    pm.add_argument("--grid", type=int, default=64)
    pm.set_defaults(func=cmd_lebesgue_map)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if not args.eps:
        args.eps = [0.1]
    try:
        return args.func(args)
    except BoundViolated as e:
        print(f"BOUND VIOLATED: {e}", file=sys.stderr)
        return 2
    except (DepthExceeded, ToleranceUnreachable, TubeInfeasible,
            NotPiecewise) as e:
        print(f"UNREACHABLE: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
