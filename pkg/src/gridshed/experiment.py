"""Batch experiment pipeline: per-(case, seed, kind) solves, redispatch
evaluation, and table/CSV/JSON reporting.

A matrix run produces one record per cell with full provenance (case, seed,
kind, alpha, linearization count, tolerances) plus three aggregate tables:
average solve times with time-limit counts, bound ratios against the best
exact bound, and redispatch performance with feasible-scenario counts.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .formulation import FormulationKind, build_formulation
from .matpower import bundled_case_path, parse_case
from .network import Network, generate_risk_scenario, sanitize_negative_loads
from .redispatch import evaluate as redispatch_evaluate
from .solver import BnbConfig, solve

log = logging.getLogger("gridshed.experiment")

EXACT_KINDS = (FormulationKind.SOC_OPS, FormulationKind.SOC_OPS_P)
CSV_COLUMNS = [
    "case", "seed", "kind", "alpha", "lin_points", "status", "objective", "bound",
    "gap", "time_s", "nodes", "cuts", "redispatch_feasible", "delivered",
    "estimated", "perf_ratio", "bound_ratio",
]
DESK_SCALE_BUSES = 73


@dataclass
class ExperimentPlan:
    cases: list
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    kinds: list = field(default_factory=lambda: list(FormulationKind)[:6])
    alpha: float = 0.5
    lin_points: int = 5
    time_limit: float = 300.0
    gap: float = 1e-4
    threads: int = 1
    out_dir: Path | None = None

    def __post_init__(self):
        if not self.cases or not self.seeds or not self.kinds:
            raise ValueError("plan needs at least one case, seed, and kind")
        self.kinds = [FormulationKind.parse(k) if isinstance(k, str) else k for k in self.kinds]

    def config(self) -> BnbConfig:
        return BnbConfig(time_limit=self.time_limit, rel_gap=self.gap)


@dataclass
class RunRecord:
    case: str
    seed: int
    kind: str
    alpha: float
    lin_points: int
    status: str
    objective: float | None = None
    bound: float | None = None
    gap: float | None = None
    time_s: float = 0.0
    nodes: int = 0
    cuts: int = 0
    redispatch_feasible: bool | None = None
    delivered: float | None = None
    estimated: float | None = None
    perf_ratio: float | None = None
    bound_ratio: float | None = None
    tolerances: dict = field(default_factory=dict)


def resolve_case(spec) -> Path:
    path = Path(spec)
    if path.exists():
        return path
    return bundled_case_path(str(spec))


def load_case(spec) -> Network:
    net = parse_case(resolve_case(spec))
    net, dropped = sanitize_negative_loads(net)
    if dropped:
        log.info("case %s: zeroed %d negative loads", net.name, dropped)
    return net


def _tolerances(cfg: BnbConfig) -> dict:
    return {"rel_gap": cfg.rel_gap, "abs_gap": cfg.abs_gap,
            "feas_tol": cfg.feas_tol, "int_tol": cfg.int_tol}


def run_cell(net: Network, seed: int, kind: FormulationKind, plan: ExperimentPlan,
             best_soc_bound: float | None = None, lin_points: int | None = None):
    """Solve one (case, seed, kind) cell; returns (record, result, vmap)."""
    cfg = plan.config()
    lin = plan.lin_points if lin_points is None else lin_points
    record = RunRecord(case=net.name, seed=seed, kind=kind.value, alpha=plan.alpha,
                       lin_points=lin, status="error", tolerances=_tolerances(cfg))
    scenario = generate_risk_scenario(net, seed)
    try:
        inst, vmap = build_formulation(net, scenario, plan.alpha, kind, lin_points=lin)
        result = solve(inst, config=cfg)
    except Exception as exc:  # individual failures recorded, run continues
        log.error("cell (%s, %d, %s) failed: %s", net.name, seed, kind.value, exc)
        record.status = "error"
        return record, None, None
    record.status = result.status
    record.objective = result.objective
    record.bound = result.bound
    record.gap = result.gap
    record.time_s = round(result.time_s, 4)
    record.nodes = result.nodes
    record.cuts = result.cuts

    if result.feasible:
        report = redispatch_evaluate(net, scenario, result, vmap, config=cfg,
                                     best_soc_bound=best_soc_bound,
                                     lin_points=plan.lin_points)
        record.redispatch_feasible = report.feasible
        record.delivered = report.delivered
        record.estimated = report.estimated
        record.perf_ratio = report.perf_ratio
        record.bound_ratio = report.bound_ratio
    return record, result, vmap


def _run_group(net: Network, seed: int, plan: ExperimentPlan) -> list[RunRecord]:
    """All kinds for one (case, seed): exact kinds first to get the bound."""
    records: dict[FormulationKind, RunRecord] = {}
    best_bound = None
    ordered = [k for k in EXACT_KINDS if k in plan.kinds] + \
              [k for k in plan.kinds if k not in EXACT_KINDS]
    for kind in ordered:
        record, result, _ = run_cell(net, seed, kind, plan, best_soc_bound=best_bound)
        if kind in EXACT_KINDS and result is not None and result.bound is not None:
            best_bound = result.bound if best_bound is None else min(best_bound, result.bound)
            record.bound_ratio = (result.objective / best_bound
                                  if result.objective is not None and best_bound > 0 else None)
        records[kind] = record
    # exact cells may have finished before the best bound was known
    for kind in EXACT_KINDS:
        if kind in records and best_bound and records[kind].objective is not None:
            records[kind].bound_ratio = records[kind].objective / best_bound
    return [records[k] for k in plan.kinds]


def run_matrix(plan: ExperimentPlan) -> list[RunRecord]:
    """One record per (case, seed, kind); writes result files when out_dir set."""
    nets = [load_case(c) for c in plan.cases]
    for net in nets:
        exact = [k for k in plan.kinds if k in EXACT_KINDS or k is FormulationKind.SOC_OPS_T]
        if len(net.buses) > DESK_SCALE_BUSES and exact:
            log.warning("case %s has %d buses; exact kinds may need long time limits",
                        net.name, len(net.buses))
    groups = [(net, seed) for net in nets for seed in plan.seeds]
    if plan.threads > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            chunks = list(pool.map(lambda g: _run_group(g[0], g[1], plan), groups))
    else:
        chunks = [_run_group(net, seed, plan) for net, seed in groups]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.case, r.seed, [k.value for k in plan.kinds].index(r.kind)))
    if plan.out_dir is not None:
        report(records, plan.out_dir)
    return records


def sweep_linearization(plan: ExperimentPlan, counts=(5, 10, 15)) -> list[RunRecord]:
    """Cut-count sweep for the fully linear kinds.

    Solves the perspective model once per (case, seed) for the reference
    bound, then one record per linearization count.
    """
    for kind in plan.kinds:
        if kind not in (FormulationKind.SOC_OPS_M, FormulationKind.SOC_OPS_S):
            raise ValueError("sweep only applies to the fully linear kinds (M, S)")
    nets = [load_case(c) for c in plan.cases]
    records = []
    for net in nets:
        for seed in plan.seeds:
            ref, _, _ = run_cell(net, seed, FormulationKind.SOC_OPS_P, plan)
            best_bound = ref.bound
            for kind in plan.kinds:
                for count in counts:
                    record, _, _ = run_cell(net, seed, kind, plan,
                                            best_soc_bound=best_bound, lin_points=count)
                    records.append(record)
    records.sort(key=lambda r: (r.case, r.seed, r.kind, r.lin_points))
    if plan.out_dir is not None:
        report(records, plan.out_dir, prefix="sweep")
    return records


# ------------------------------------------------------------------ reports


def report(records: list[RunRecord], out_dir, prefix: str = "results") -> list[Path]:
    """Write the record table (CSV + JSON) and the three aggregate tables."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    csv_path = out_dir / f"{prefix}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            d = asdict(rec)
            writer.writerow([_csv_cell(d[col]) for col in CSV_COLUMNS])
    paths.append(csv_path)

    json_path = out_dir / f"{prefix}.json"
    with open(json_path, "w") as fh:
        json.dump({"format": "gridshed-results", "version": 1,
                   "records": [asdict(r) for r in records]}, fh, indent=1)
    paths.append(json_path)

    paths.append(_aggregate_table(
        records, out_dir / f"{prefix}_solve_time.txt",
        value=lambda r: r.time_s,
        count_flag=lambda r: r.status == "feasible_at_limit",
        fmt=lambda v: f"{v:.2f}",
        title="average solve time [s] (count at time limit)"))
    paths.append(_aggregate_table(
        records, out_dir / f"{prefix}_bound_ratio.txt",
        value=lambda r: r.bound_ratio,
        count_flag=None,
        fmt=lambda v: f"{100.0 * v:.2f}%",
        title="objective over best exact bound"))
    paths.append(_aggregate_table(
        records, out_dir / f"{prefix}_redispatch.txt",
        value=lambda r: r.perf_ratio if r.redispatch_feasible else None,
        count_flag=lambda r: bool(r.redispatch_feasible),
        fmt=lambda v: f"{100.0 * v:.2f}%",
        title="average redispatch performance (feasible scenarios)"))
    return paths


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True)
    return value


def _aggregate_table(records, path: Path, value, count_flag, fmt, title: str) -> Path:
    cases = sorted({r.case for r in records})
    kinds = []
    for r in records:
        if r.kind not in kinds:
            kinds.append(r.kind)
    lines = [f"# {title}"]
    header = ["case"] + kinds
    rows = [header]
    for case in cases:
        row = [case]
        for kind in kinds:
            cell_records = [r for r in records if r.case == case and r.kind == kind]
            vals = [value(r) for r in cell_records]
            vals = [v for v in vals if v is not None]
            if not vals:
                row.append("-")
                continue
            cell = fmt(sum(vals) / len(vals))
            if count_flag is not None:
                n = sum(1 for r in cell_records if count_flag(r))
                cell += f" ({n})"
            row.append(cell)
        rows.append(row)
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(header))]
    for row in rows:
        lines.append("  ".join(str(cell).rjust(w) for cell, w in zip(row, widths)))
    path.write_text("\n".join(lines) + "\n")
    return path
