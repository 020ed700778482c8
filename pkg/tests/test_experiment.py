import csv
import json

import pytest

from gridshed.experiment import (
    CSV_COLUMNS,
    ExperimentPlan,
    RunRecord,
    report,
    run_matrix,
    sweep_linearization,
)
from gridshed.matpower import bundled_case_path

ALL_KINDS = ["soc-ops", "soc-ops-p", "soc-ops-t", "soc-ops-m", "soc-ops-s", "dc-ops"]


def toy_plan(tmp_path, seeds=(1, 2), kinds=ALL_KINDS, **overrides):
    settings = dict(
        cases=[bundled_case_path("case3_shutoff")],
        seeds=list(seeds),
        kinds=list(kinds),
        alpha=0.5,
        lin_points=5,
        time_limit=120.0,
        gap=1e-6,
        out_dir=tmp_path / "out",
    )
    settings.update(overrides)
    return ExperimentPlan(**settings)


class TestRunMatrix:
    def test_record_census_and_files(self, tmp_path):
        plan = toy_plan(tmp_path)
        records = run_matrix(plan)
        assert len(records) == 1 * 2 * 6  # cases x seeds x kinds
        for rec in records:
            assert rec.status == "optimal"
            assert rec.tolerances["rel_gap"] == 1e-6
        out = plan.out_dir
        assert (out / "results.csv").exists()
        assert (out / "results.json").exists()
        assert (out / "results_solve_time.txt").exists()
        assert (out / "results_bound_ratio.txt").exists()
        assert (out / "results_redispatch.txt").exists()

    def test_exact_kind_bound_ratios_at_most_one(self, tmp_path):
        plan = toy_plan(tmp_path, seeds=(1,), kinds=["soc-ops", "soc-ops-p", "soc-ops-s"])
        records = run_matrix(plan)
        by_kind = {r.kind: r for r in records}
        for kind in ("soc-ops", "soc-ops-p"):
            assert by_kind[kind].bound_ratio <= 1.0 + 1e-5
        assert by_kind["soc-ops-s"].bound_ratio >= 1.0 - 1e-5

    def test_dc_records_have_redispatch(self, tmp_path):
        plan = toy_plan(tmp_path, seeds=(1,), kinds=["dc-ops"])
        (record,) = run_matrix(plan)
        assert record.redispatch_feasible is not None
        assert record.delivered is not None

    def test_rerun_identical_modulo_timing(self, tmp_path):
        plan_a = toy_plan(tmp_path, seeds=(1,), kinds=["soc-ops-p", "soc-ops-s"],
                          out_dir=tmp_path / "a")
        plan_b = toy_plan(tmp_path, seeds=(1,), kinds=["soc-ops-p", "soc-ops-s"],
                          out_dir=tmp_path / "b")
        run_matrix(plan_a)
        run_matrix(plan_b)

        def strip_timing(path):
            rows = list(csv.DictReader(open(path)))
            for row in rows:
                row.pop("time_s")
            return rows

        assert strip_timing(tmp_path / "a" / "results.csv") == \
            strip_timing(tmp_path / "b" / "results.csv")

    def test_cross_process_determinism(self, tmp_path):
        import subprocess
        import sys

        script = (
            "from gridshed.experiment import ExperimentPlan, run_matrix;"
            "from pathlib import Path;"
            "import sys;"
            "plan = ExperimentPlan(cases=['case3_shutoff'], seeds=[1], "
            "kinds=['soc-ops-p'], gap=1e-6, out_dir=Path(sys.argv[1]));"
            "run_matrix(plan)"
        )
        for sub in ("p1", "p2"):
            proc = subprocess.run([sys.executable, "-c", script, str(tmp_path / sub)],
                                  capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr

        def strip_timing(path):
            rows = list(csv.DictReader(open(path)))
            for row in rows:
                row.pop("time_s")
            return rows

        assert strip_timing(tmp_path / "p1" / "results.csv") == \
            strip_timing(tmp_path / "p2" / "results.csv")

    def test_threaded_matches_serial(self, tmp_path):
        serial = run_matrix(toy_plan(tmp_path, seeds=(1, 2), kinds=["soc-ops-s"],
                                     out_dir=None))
        threaded = run_matrix(toy_plan(tmp_path, seeds=(1, 2), kinds=["soc-ops-s"],
                                       out_dir=None, threads=2))
        assert [(r.case, r.seed, r.kind, r.objective) for r in serial] == \
            [(r.case, r.seed, r.kind, r.objective) for r in threaded]

    def test_empty_plan_rejected(self):
        with pytest.raises(ValueError):
            ExperimentPlan(cases=[], seeds=[1], kinds=["soc-ops"])


class TestSweep:
    def test_census_and_monotone_bound_ratio(self, tmp_path):
        plan = toy_plan(tmp_path, seeds=(1, 4), kinds=["soc-ops-s"])
        records = sweep_linearization(plan, counts=(5, 10, 15))
        assert len(records) == 2 * 3  # seeds x counts
        for seed in (1, 4):
            ratios = [r.bound_ratio for r in records if r.seed == seed]
            assert all(r is not None for r in ratios)
            # nested grids: more cuts can only shrink the feasible region
            assert all(a >= b - 1e-9 for a, b in zip(ratios, ratios[1:]))

    def test_rejects_exact_kinds(self, tmp_path):
        plan = toy_plan(tmp_path, kinds=["soc-ops-p"])
        with pytest.raises(ValueError, match="linear"):
            sweep_linearization(plan)


class TestReport:
    def test_empty_records_header_only(self, tmp_path):
        paths = report([], tmp_path)
        with open(tmp_path / "results.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows == [CSV_COLUMNS]
        data = json.loads((tmp_path / "results.json").read_text())
        assert data["records"] == []

    def _record(self, **kw):
        base = dict(case="c", seed=1, kind="soc-ops-m", alpha=0.5, lin_points=5,
                    status="optimal", objective=0.4, bound=0.41, gap=0.0, time_s=1.0,
                    nodes=3, cuts=0, redispatch_feasible=True, delivered=0.2,
                    estimated=0.3, perf_ratio=0.4939, bound_ratio=1.0301)
        base.update(kw)
        return RunRecord(**base)

    def test_time_limit_annotation(self, tmp_path):
        records = [self._record(seed=s) for s in range(1, 6)]
        records[1] = self._record(seed=2, status="feasible_at_limit")
        records[3] = self._record(seed=4, status="feasible_at_limit")
        report(records, tmp_path)
        text = (tmp_path / "results_solve_time.txt").read_text()
        assert "(2)" in text

    def test_percent_formatting(self, tmp_path):
        report([self._record()], tmp_path)
        redisp = (tmp_path / "results_redispatch.txt").read_text()
        assert "49.39% (1)" in redisp
        bound = (tmp_path / "results_bound_ratio.txt").read_text()
        assert "103.01%" in bound

    def test_infeasible_redispatch_excluded_from_average(self, tmp_path):
        records = [self._record(),
                   self._record(seed=2, redispatch_feasible=False, perf_ratio=None)]
        report(records, tmp_path)
        text = (tmp_path / "results_redispatch.txt").read_text()
        assert "49.39% (1)" in text

    def test_provenance_in_json(self, tmp_path):
        rec = self._record()
        rec.tolerances = {"rel_gap": 1e-4, "abs_gap": 1e-9, "feas_tol": 1e-6, "int_tol": 1e-6}
        report([rec], tmp_path)
        data = json.loads((tmp_path / "results.json").read_text())
        row = data["records"][0]
        for key in ("case", "seed", "kind", "alpha", "lin_points", "tolerances"):
            assert key in row
        assert row["tolerances"]["rel_gap"] == 1e-4
