import math

import numpy as np
import pytest

from gridshed.formulation import FormulationKind, build_formulation
from gridshed.instance import ConeSide, ConicMipInstance
from gridshed.network import Bus, Generator, Line, Load, Network, generate_risk_scenario
from gridshed.solver import (
    BnbConfig,
    LinearNodeSolver,
    OuterApproximationSolver,
    ScipyLinProgBackend,
    SolverError,
    fix_and_resolve,
    outer_approximation_loop,
    solve,
    _Node,
    _Work,
)

from oracle import best_topology_objective


def knapsack_instance():
    # max 5a + 4b + 3c s.t. 2a + 3b + c <= 4, binaries
    inst = ConicMipInstance("knapsack")
    a = inst.add_variable("a", 0, 1, integer=True)
    b = inst.add_variable("b", 0, 1, integer=True)
    c = inst.add_variable("c", 0, 1, integer=True)
    inst.add_row([a, b, c], [2.0, 3.0, 1.0], "<=", 4.0, "budget")
    inst.set_objective({a: 5.0, b: 4.0, c: 3.0})
    return inst


def tiny_net():
    return Network(
        name="tiny", base_mva=100,
        buses=(Bus(1, 0.9, 1.1), Bus(2, 0.9, 1.1)),
        lines=(Line(id=1, from_bus=1, to_bus=2, g=0.5, b=-5.0, rate=1.0),),
        generators=(Generator(1, 1, 0.0, 2.0, -1.0, 1.0),),
        loads=(Load(1, 2, pd=0.8, qd=0.2),),
    )


class TestBasics:
    def test_knapsack(self):
        res = solve(knapsack_instance())
        assert res.status == "optimal"
        assert res.objective == pytest.approx(8.0)  # a and c
        assert np.allclose(res.x, [1, 0, 1])

    def test_pure_continuous_single_node(self):
        inst = ConicMipInstance("lp")
        x = inst.add_variable("x", 0, 2)
        y = inst.add_variable("y", 0, 2)
        inst.add_row([x, y], [1.0, 1.0], "<=", 3.0, "cap")
        inst.set_objective({x: 1.0, y: 1.0})
        res = solve(inst)
        assert res.status == "optimal"
        assert res.nodes == 1
        assert res.objective == pytest.approx(3.0)

    def test_forced_infeasible_by_bounds(self, toy_net):
        inst, vmap = build_formulation(toy_net, None, 0.5, FormulationKind.SOC_OPS_P)
        inst.lo[vmap.z_bus[1]] = inst.hi[vmap.z_bus[1]] = 0.0
        inst.lo[vmap.z_line[1]] = 1.0  # line 1 requires bus 1
        res = solve(inst)
        assert res.status == "infeasible"

    def test_unbounded(self):
        inst = ConicMipInstance("ub")
        inst.add_variable("x", 0, math.inf)
        inst.set_objective({0: 1.0})
        assert solve(inst).status == "unbounded"

    def test_invalid_instance_raises(self):
        inst = knapsack_instance()
        inst.add_row([17], [1.0], "<=", 1.0, "bad")
        with pytest.raises(SolverError, match="invalid"):
            solve(inst)

    def test_missing_objective_raises(self):
        inst = ConicMipInstance("noobj")
        inst.add_variable("x", 0, 1)
        with pytest.raises(SolverError, match="objective"):
            solve(inst)

    def test_linear_solver_refuses_cones(self, toy_net):
        inst, _ = build_formulation(toy_net, None, 0.5, FormulationKind.SOC_OPS_P)
        with pytest.raises(SolverError, match="linear-only"):
            solve(inst, node_solver=LinearNodeSolver())


class TestDeterminism:
    def test_repeat_solves_identical(self, toy_net, tight_config):
        scen = generate_risk_scenario(toy_net, 3)
        inst, _ = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_P)
        a = solve(inst, tight_config)
        b = solve(inst, tight_config)
        assert a.objective == b.objective
        assert a.nodes == b.nodes
        assert a.cuts == b.cuts
        assert np.array_equal(a.x, b.x)

    def test_bound_monotone_incumbent_monotone(self, case14_net):
        scen = generate_risk_scenario(case14_net, 1)
        inst, _ = build_formulation(case14_net, scen, 0.5, FormulationKind.SOC_OPS_S)
        res = solve(inst, BnbConfig(rel_gap=0.0, abs_gap=2.5e-7))
        bounds = np.array(res.bound_history)
        incs = np.array(res.incumbent_history)
        assert np.all(np.diff(bounds) <= 1e-12)
        assert np.all(np.diff(incs) >= -1e-12)
        assert res.status == "optimal"

    def test_oa_and_linear_mode_coincide_without_cones(self, toy_net, tight_config):
        scen = generate_risk_scenario(toy_net, 2)
        inst, _ = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_M)
        assert inst.n_cones == 0
        lin = solve(inst, tight_config, node_solver=LinearNodeSolver())
        oa = solve(inst, tight_config, node_solver=OuterApproximationSolver())
        assert lin.objective == pytest.approx(oa.objective, abs=1e-12)
        assert lin.nodes == oa.nodes


class TestOuterApproximation:
    def single_cone_instance(self):
        # max wr subject to wr^2 + wi^2 <= wfr * wto, wfr = wto = 1
        inst = ConicMipInstance("cone")
        wr = inst.add_variable("wr", 0.0, 2.0)
        wi = inst.add_variable("wi", -1.0, 1.0)
        wfr = inst.add_variable("wfr", 1.0, 1.0)
        wto = inst.add_variable("wto", 1.0, 1.0)
        inst.add_cone(wr, wi, ConeSide(wfr), ConeSide(wto), "vcone")
        inst.set_objective({wr: 1.0})
        return inst

    def test_converges_to_analytic_optimum(self):
        inst = self.single_cone_instance()
        cfg = BnbConfig(feas_tol=1e-8, frac_cone_tol=1e-8, max_cut_rounds=100)
        status, x, obj, rounds = outer_approximation_loop(inst, config=cfg)
        assert status == "optimal"
        assert obj == pytest.approx(1.0, abs=1e-6)
        assert x[0] == pytest.approx(1.0, abs=1e-6)
        assert rounds > 0

    def test_no_violation_returns_immediately(self):
        inst = self.single_cone_instance()
        inst.set_objective({1: 0.0})  # 0 objective: origin-ish optimum, cone loose
        inst.hi[0] = 0.0
        status, x, obj, rounds = outer_approximation_loop(inst)
        assert status == "optimal"
        assert rounds == 0

    def test_rejects_instance_without_cones(self):
        with pytest.raises(SolverError, match="no cones"):
            outer_approximation_loop(knapsack_instance())

    def test_children_inherit_parent_cuts(self, toy_net):
        scen = generate_risk_scenario(toy_net, 1)
        inst, _ = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_P)
        cfg = BnbConfig()
        work = _Work(inst, cfg)
        lo, hi = inst.bounds_arrays()
        root = _Node(lo, hi, [])
        OuterApproximationSolver().solve_node(work, root)
        assert root.cut_rows, "root separation expected to add cuts"
        child = _Node(lo.copy(), hi.copy(), list(root.cut_rows), depth=1)
        assert child.cut_rows == root.cut_rows
        # re-solving the child starts from the parent's outer approximation:
        # no new separation work is needed at the same point
        sol = OuterApproximationSolver().solve_node(work, child)
        assert sol.rounds <= 1

    def test_incumbents_cone_clean(self, toy_net, tight_config):
        scen = generate_risk_scenario(toy_net, 4)
        inst, _ = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS)
        res = solve(inst, tight_config)
        assert res.status == "optimal"
        report = inst.check_point(res.x, 1e-6)
        assert report.ok(1e-6)
        assert report.max_cone <= 1e-6


class TestFixAndResolve:
    def test_refix_incumbent_matches(self, toy_net, tight_config):
        scen = generate_risk_scenario(toy_net, 2)
        inst, vmap = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_P)
        res = solve(inst, tight_config)
        assignment = {c: float(round(res.x[c])) for c in inst.integer_cols()}
        again = fix_and_resolve(inst, assignment, tight_config)
        assert again.status == "optimal"
        assert again.objective == pytest.approx(res.objective, abs=1e-6)

    def test_all_zeros_feasible(self, toy_net, tight_config):
        inst, _ = build_formulation(toy_net, None, 0.5, FormulationKind.SOC_OPS_P)
        assignment = {c: 0.0 for c in inst.integer_cols()}
        res = fix_and_resolve(inst, assignment, tight_config)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(0.0, abs=1e-10)

    def test_ordering_violating_pattern_infeasible(self, toy_net):
        inst, vmap = build_formulation(toy_net, None, 0.5, FormulationKind.SOC_OPS_P)
        assignment = {c: 0.0 for c in inst.integer_cols()}
        assignment[vmap.z_line[1]] = 1.0  # line on, its buses off
        res = fix_and_resolve(inst, assignment)
        assert res.status == "infeasible"

    def test_incomplete_assignment_raises(self, toy_net):
        inst, _ = build_formulation(toy_net, None, 0.5, FormulationKind.SOC_OPS_P)
        with pytest.raises(SolverError, match="misses"):
            fix_and_resolve(inst, {})


class TestAgainstOracle:
    @pytest.mark.parametrize("kind", [FormulationKind.SOC_OPS_P, FormulationKind.SOC_OPS_M,
                                      FormulationKind.DC_OPS])
    def test_two_bus_matches_enumeration(self, kind, tight_config):
        net = tiny_net()
        scen = generate_risk_scenario(net, 5)
        expected, _ = best_topology_objective(net, scen, 0.5, kind)
        if kind is FormulationKind.DC_OPS:
            from gridshed.formulation import build_dc_ops
            inst, _ = build_dc_ops(net, scen, 0.5)
        else:
            inst, _ = build_formulation(net, scen, 0.5, kind)
        res = solve(inst, tight_config)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(expected, abs=1e-6)


class TestRelaxationDominance:
    def test_perspective_root_bound_at_most_product_root_bound(self, toy_net, case14_net):
        # the perspective cone region is contained in the product-relaxed one,
        # so its continuous relaxation bound can only be lower
        cfg = BnbConfig(feas_tol=1e-8, frac_cone_tol=1e-8, max_cut_rounds=300)
        for net, seed in ((toy_net, 1), (toy_net, 4), (case14_net, 2)):
            scen = generate_risk_scenario(net, seed)
            bounds = {}
            for kind in (FormulationKind.SOC_OPS, FormulationKind.SOC_OPS_P):
                inst, _ = build_formulation(net, scen, 0.5, kind)
                status, _, obj, _ = outer_approximation_loop(inst, config=cfg)
                assert status == "optimal"
                bounds[kind] = obj
            assert bounds[FormulationKind.SOC_OPS_P] <= bounds[FormulationKind.SOC_OPS] + 1e-6

    def test_binary_fixings_give_equal_exact_objectives(self, toy_net, tight_config, rng):
        # for any consistent fully binary switching pattern, the product-relaxed
        # and perspective formulations describe the same continuous feasible set
        inst_e, vmap_e = build_formulation(toy_net, None, 0.5, FormulationKind.SOC_OPS)
        inst_p, vmap_p = build_formulation(toy_net, None, 0.5, FormulationKind.SOC_OPS_P)
        assert vmap_e.binary_cols() == vmap_p.binary_cols()
        tried = 0
        for _ in range(40):
            line_state = {ln.id: int(rng.uniform() < 0.7) for ln in toy_net.lines}
            bus_state = {b.id: 1 for b in toy_net.buses}
            gen_state = {g.id: int(rng.uniform() < 0.8) for g in toy_net.generators}
            assignment = {}
            for lid, col in vmap_e.z_line.items():
                assignment[col] = float(line_state[lid])
            for bid, col in vmap_e.z_bus.items():
                assignment[col] = float(bus_state[bid])
            for gid, col in vmap_e.z_gen.items():
                assignment[col] = float(gen_state[gid])
            res_e = fix_and_resolve(inst_e, assignment, tight_config)
            res_p = fix_and_resolve(inst_p, assignment, tight_config)
            assert res_e.status == res_p.status
            if res_e.status == "optimal":
                assert res_e.objective == pytest.approx(res_p.objective, abs=1e-6)
                tried += 1
        assert tried >= 10


class TestLogging:
    def test_incumbent_log_lines(self, toy_net, tight_config, caplog):
        import logging

        scen = generate_risk_scenario(toy_net, 1)
        inst, _ = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_P)
        with caplog.at_level(logging.INFO, logger="gridshed.solver"):
            solve(inst, tight_config)
        assert any("incumbent" in rec.message for rec in caplog.records)


class TestTimeLimit:
    def test_feasible_at_limit_reports_bound(self, case14_net):
        scen = generate_risk_scenario(case14_net, 4)
        inst, _ = build_formulation(case14_net, scen, 0.5, FormulationKind.SOC_OPS)
        res = solve(inst, BnbConfig(time_limit=2.0, rel_gap=0.0, abs_gap=1e-12))
        assert res.status == "feasible_at_limit"
        assert res.x is not None and res.bound is not None
        assert res.bound >= res.objective - 1e-9
        assert res.gap > 0


class TestBackendAdapter:
    def test_custom_backend_is_used(self, toy_net, tight_config):
        calls = {"n": 0}

        class CountingBackend(ScipyLinProgBackend):
            def solve(self, *args, **kwargs):
                calls["n"] += 1
                return super().solve(*args, **kwargs)

        scen = generate_risk_scenario(toy_net, 1)
        inst, _ = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_S)
        res = solve(inst, tight_config, backend=CountingBackend())
        assert res.status == "optimal"
        assert calls["n"] >= res.nodes  # one LP per node plus heuristic resolves
