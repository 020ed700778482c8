"""Cross-validation of the outer-approximation continuous solves against an
independent conic solver (cvxpy), when one is installed.

Translates a ConicMipInstance generically: linear rows as-is, each rotated
membership x^2 + y^2 <= a*b as the standard cone ||(2x, 2y, a-b)|| <= a+b.
"""

import numpy as np
import pytest

cp = pytest.importorskip("cvxpy")

from gridshed.formulation import FormulationKind, build_formulation, build_redispatch
from gridshed.network import generate_risk_scenario
from gridshed.solver import BnbConfig, fix_and_resolve

TIGHT = BnbConfig(rel_gap=0.0, abs_gap=1e-10, incumbent_cone_tol=1e-9,
                  frac_cone_tol=1e-9, max_cut_rounds=300)


def cvxpy_solve(inst, fixed=None):
    x = cp.Variable(inst.n_vars)
    constraints = []
    lo, hi = inst.bounds_arrays()
    if fixed:
        lo, hi = lo.copy(), hi.copy()
        for col, val in fixed.items():
            lo[col] = hi[col] = val
    finite_lo = np.isfinite(lo)
    finite_hi = np.isfinite(hi)
    if finite_lo.any():
        constraints.append(x[finite_lo] >= lo[finite_lo])
    if finite_hi.any():
        constraints.append(x[finite_hi] <= hi[finite_hi])
    A_ub, b_ub, A_eq, b_eq = inst.lp_arrays()
    if A_ub.shape[0]:
        constraints.append(A_ub @ x <= b_ub)
    if A_eq.shape[0]:
        constraints.append(A_eq @ x == b_eq)
    for cone in inst.cones:
        def side(s):
            return s.coef * x[s.col] + s.const if s.col is not None else s.const
        a, b = side(cone.a), side(cone.b)
        constraints.append(cp.SOC(a + b, cp.hstack([2 * x[cone.x_col],
                                                    2 * x[cone.y_col], a - b])))
    problem = cp.Problem(cp.Maximize(inst.obj @ x), constraints)
    for solver in ("CLARABEL", "ECOS", "SCS"):
        if solver in cp.installed_solvers():
            problem.solve(solver=solver)
            break
    else:
        pytest.skip("no conic solver installed")
    if problem.status not in ("optimal", "optimal_inaccurate"):
        return problem.status, None
    return "optimal", float(problem.value)


def all_on_assignment(inst, vmap):
    return {int(c): 1.0 for c in inst.integer_cols()}


class TestAgainstIndependentConicSolver:
    def test_toy_fixed_topologies(self, toy_net):
        scen = generate_risk_scenario(toy_net, 2)
        inst, vmap = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_P)
        patterns = [
            {},                                  # everything energized
            {vmap.z_line[2]: 0.0},               # drop one line
            {vmap.z_line[1]: 0.0, vmap.z_line[3]: 0.0},  # island bus pockets
        ]
        for pattern in patterns:
            assignment = all_on_assignment(inst, vmap)
            assignment.update({int(k): v for k, v in pattern.items()})
            ours = fix_and_resolve(inst, assignment, TIGHT)
            assert ours.status == "optimal"
            status, reference = cvxpy_solve(inst, fixed=assignment)
            assert status == "optimal"
            assert ours.objective == pytest.approx(reference, abs=2e-6)

    def test_case14_redispatch_value(self, case14_net):
        fixed = {
            "bus": {b.id: 1 for b in case14_net.buses},
            "line": {ln.id: 1 for ln in case14_net.lines},
            "gen": {g.id: 1 for g in case14_net.generators},
        }
        inst, vmap = build_redispatch(case14_net, fixed)
        ours = fix_and_resolve(inst, {int(c): inst.lo[c] for c in inst.integer_cols()}, TIGHT)
        assert ours.status == "optimal"
        status, reference = cvxpy_solve(inst)
        assert status == "optimal"
        assert ours.objective == pytest.approx(reference, abs=2e-6)

    def test_toy_exact_formulations_agree_with_reference(self, toy_net):
        # both exact kinds, all switches closed, against the reference solver
        scen = generate_risk_scenario(toy_net, 5)
        for kind in (FormulationKind.SOC_OPS, FormulationKind.SOC_OPS_P):
            inst, vmap = build_formulation(toy_net, scen, 0.5, kind)
            assignment = all_on_assignment(inst, vmap)
            ours = fix_and_resolve(inst, assignment, TIGHT)
            status, reference = cvxpy_solve(inst, fixed=assignment)
            assert ours.status == status == "optimal"
            assert ours.objective == pytest.approx(reference, abs=2e-6)
