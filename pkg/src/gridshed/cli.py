"""Command-line driver: single solves, redispatch checks, experiment
matrices, and linearization sweeps."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .experiment import ExperimentPlan, load_case, run_matrix, sweep_linearization
from .formulation import FormulationKind, build_formulation
from .network import generate_risk_scenario
from .redispatch import evaluate as redispatch_evaluate
from .solver import BnbConfig, solve

KIND_CHOICES = [k.value for k in FormulationKind if k is not FormulationKind.REDISPATCH]


def _add_common(parser: argparse.ArgumentParser, multi_case: bool = False):
    if multi_case:
        parser.add_argument("--cases", nargs="+", required=True,
                            help="case file paths or bundled case names")
    else:
        parser.add_argument("--case", required=True,
                            help="case file path or bundled case name")
    parser.add_argument("--alpha", type=float, default=0.5,
                        help="load-vs-risk tradeoff in [0,1] (default 0.5)")
    parser.add_argument("--seeds", default="1,2,3,4,5",
                        help="comma-separated risk scenario seeds")
    parser.add_argument("--lin-points", type=int, default=5,
                        help="linearization points per quadratic term")
    parser.add_argument("--time-limit", type=float, default=300.0)
    parser.add_argument("--gap", type=float, default=1e-4, help="relative gap target")
    parser.add_argument("--threads", type=int, default=None,
                        help="parallel (case, seed) cells; GRIDSHED_THREADS overrides")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")


def _seeds(text: str) -> list[int]:
    return [int(tok) for tok in str(text).replace(" ", "").split(",") if tok != ""]


def _threads(args) -> int:
    env = os.environ.get("GRIDSHED_THREADS")
    if env is not None:
        return max(1, int(env))
    return max(1, args.threads or 1)


def _config(args) -> BnbConfig:
    return BnbConfig(time_limit=args.time_limit, rel_gap=args.gap)


def _print_result(result, prefix: str = ""):
    obj = "n/a" if result.objective is None else f"{result.objective:.8f}"
    bound = "n/a" if result.bound is None else f"{result.bound:.8f}"
    gap = "n/a" if result.gap is None else f"{100.0 * result.gap:.4f}%"
    print(f"{prefix}status={result.status} objective={obj} bound={bound} "
          f"gap={gap} nodes={result.nodes} cuts={result.cuts} time={result.time_s:.2f}s")


def cmd_solve(args) -> int:
    net = load_case(args.case)
    kind = FormulationKind.parse(args.formulation)
    seeds = _seeds(args.seeds)
    rc = 0
    for seed in seeds:
        scenario = generate_risk_scenario(net, seed)
        inst, _ = build_formulation(net, scenario, args.alpha, kind,
                                    lin_points=args.lin_points)
        result = solve(inst, config=_config(args))
        _print_result(result, prefix=f"[{net.name} seed={seed} {kind.value}] ")
        if not result.feasible:
            rc = 1
        if args.out is not None and result.feasible:
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / f"{net.name}_{kind.value}_seed{seed}.json"
            payload = {
                "case": net.name, "seed": seed, "kind": kind.value, "alpha": args.alpha,
                "status": result.status, "objective": result.objective,
                "bound": result.bound, "gap": result.gap,
                "values": {name: float(result.x[i]) for i, name in enumerate(inst.var_names)},
            }
            path.write_text(json.dumps(payload, indent=1))
            print(f"  wrote {path}")
    return rc


def cmd_redispatch(args) -> int:
    net = load_case(args.case)
    kind = FormulationKind.parse(args.formulation)
    rc = 0
    for seed in _seeds(args.seeds):
        scenario = generate_risk_scenario(net, seed)
        inst, vmap = build_formulation(net, scenario, args.alpha, kind,
                                       lin_points=args.lin_points)
        result = solve(inst, config=_config(args))
        _print_result(result, prefix=f"[{net.name} seed={seed} {kind.value}] ")
        if not result.feasible:
            rc = 1
            continue
        report = redispatch_evaluate(net, scenario, result, vmap, config=_config(args),
                                     lin_points=args.lin_points)
        if report.feasible:
            ratio = "n/a" if report.perf_ratio is None else f"{100.0 * report.perf_ratio:.2f}%"
            print(f"  redispatch: delivered={report.delivered:.6f} pu "
                  f"estimated={report.estimated:.6f} pu performance={ratio}")
        else:
            print(f"  redispatch infeasible: {report.diagnostics}")
    return rc


def _plan(args, kinds) -> ExperimentPlan:
    cases = args.cases if hasattr(args, "cases") else [args.case]
    return ExperimentPlan(
        cases=cases, seeds=_seeds(args.seeds), kinds=kinds, alpha=args.alpha,
        lin_points=args.lin_points, time_limit=args.time_limit, gap=args.gap,
        threads=_threads(args), out_dir=args.out,
    )


def cmd_matrix(args) -> int:
    plan = _plan(args, [FormulationKind.parse(k) for k in args.kinds])
    records = run_matrix(plan)
    failures = sum(1 for r in records if r.status == "error")
    print(f"matrix complete: {len(records)} records, {failures} failures"
          + (f", outputs in {plan.out_dir}" if plan.out_dir else ""))
    return 1 if failures else 0


def cmd_sweep(args) -> int:
    plan = _plan(args, [FormulationKind.parse(args.formulation)])
    counts = sorted(_seeds(args.counts))
    records = sweep_linearization(plan, counts=counts)
    failures = sum(1 for r in records if r.status == "error")
    print(f"sweep complete: {len(records)} records, {failures} failures"
          + (f", outputs in {plan.out_dir}" if plan.out_dir else ""))
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshed",
        description="Optimal power shutoff solver toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one formulation on one case")
    _add_common(p)
    p.add_argument("--formulation", required=True, choices=KIND_CHOICES)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("redispatch", help="solve, then evaluate exact redispatch")
    _add_common(p)
    p.add_argument("--formulation", required=True, choices=KIND_CHOICES)
    p.set_defaults(func=cmd_redispatch)

    p = sub.add_parser("matrix", help="run the full (case, seed, kind) experiment matrix")
    _add_common(p, multi_case=True)
    p.add_argument("--kinds", nargs="+", default=KIND_CHOICES, choices=KIND_CHOICES)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("sweep", help="linearization-count sweep for the linear kinds")
    _add_common(p)
    p.add_argument("--formulation", required=True,
                   choices=[FormulationKind.SOC_OPS_M.value, FormulationKind.SOC_OPS_S.value])
    p.add_argument("--counts", default="5,10,15", help="comma-separated cut counts")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
