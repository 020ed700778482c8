import json
import math

import numpy as np
import pytest

from gridshed.formulation import FormulationKind, build_formulation
from gridshed.instance import ConeSide, ConicMipInstance, InstanceError
from gridshed.network import generate_risk_scenario


def small_instance():
    inst = ConicMipInstance("small")
    z = inst.add_variable("z", 0, 1, integer=True)
    x = inst.add_variable("x", 0, 2)
    y = inst.add_variable("y", -1, 1)
    w = inst.add_variable("w", 0, 4)
    inst.add_row([x, z], [1.0, -2.0], "<=", 0.0, "cap")
    inst.add_row([x, y], [1.0, 1.0], "==", 1.0, "tie")
    inst.add_cone(x, y, ConeSide(w), ConeSide(z, 2.0), "cone")
    inst.set_objective({x: 1.0}, maximize=True)
    return inst


class TestValidate:
    def test_well_formed(self):
        assert small_instance().validate() == []

    def test_dangling_column(self):
        inst = small_instance()
        inst.add_row([99], [1.0], "<=", 0.0, "bad")
        assert any("out of range" in e for e in inst.validate())

    def test_inverted_bounds(self):
        inst = small_instance()
        inst.lo[1], inst.hi[1] = 1.0, 0.0
        assert any("inverted" in e for e in inst.validate())

    def test_duplicate_cone_columns(self):
        inst = small_instance()
        inst.add_cone(1, 1, ConeSide(3), ConeSide(0, 2.0), "dup")
        assert any("duplicate" in e for e in inst.validate())

    def test_lhs_reused_on_rhs(self):
        inst = small_instance()
        inst.add_cone(1, 2, ConeSide(1), ConeSide(3), "reuse")
        assert any("reused" in e for e in inst.validate())


class TestCheckPoint:
    def test_feasible_point(self):
        inst = small_instance()
        # z=1, x=1, y=0, w=1: cone 1 <= 1*2 ok
        report = inst.check_point([1.0, 1.0, 0.0, 1.0])
        assert report.max_violation() <= 1e-12
        assert report.ok(1e-9)

    def test_cone_violation_reported_in_cone_class(self):
        inst = small_instance()
        # x=1.4,y=-0.4 tie holds; cone lhs = 2.12 > w*2z = 0.5
        report = inst.check_point([1.0, 1.4, -0.4, 0.25])
        assert report.max_cone == pytest.approx(1.4**2 + 0.4**2 - 0.5)
        assert report.worst_cone == "cone"

    def test_integrality_violation(self):
        inst = small_instance()
        report = inst.check_point([0.5, 0.5, 0.5, 0.0])
        assert report.max_integrality == pytest.approx(0.5)

    def test_bound_violation(self):
        inst = small_instance()
        report = inst.check_point([0.0, -0.5, 0.5, 0.0], integrality=False)
        assert report.max_bound == pytest.approx(0.5)

    def test_wrong_length_raises(self):
        with pytest.raises(InstanceError):
            small_instance().check_point([0.0])


class TestSerialization:
    def test_round_trip_identity(self, tmp_path):
        inst = small_instance()
        path = tmp_path / "inst.json"
        inst.save(path)
        again = ConicMipInstance.load(path)
        assert again.var_names == inst.var_names
        assert again.lo == inst.lo and again.hi == inst.hi
        assert again.integer == inst.integer
        assert again.n_rows == inst.n_rows
        for r in range(inst.n_rows):
            assert np.array_equal(again.row_cols[r], inst.row_cols[r])
            assert np.array_equal(again.row_vals[r], inst.row_vals[r])
            assert again.row_rhs[r] == inst.row_rhs[r]
            assert again.row_sense[r] == inst.row_sense[r]
        assert again.cones == inst.cones
        assert np.array_equal(again.obj, inst.obj)
        assert again.maximize == inst.maximize

    def test_round_trip_bit_exact_floats(self, tmp_path):
        inst = ConicMipInstance("floats")
        inst.add_variable("x", -math.inf, math.inf)
        ugly = 0.1 + 0.2  # 0.30000000000000004
        inst.add_row([0], [ugly], "<=", 1.0 / 3.0, "r")
        inst.set_objective({0: math.pi})
        path = tmp_path / "f.json"
        inst.save(path)
        again = ConicMipInstance.load(path)
        assert again.row_vals[0][0] == ugly
        assert again.row_rhs[0] == 1.0 / 3.0
        assert again.obj[0] == math.pi
        assert again.lo[0] == -math.inf and again.hi[0] == math.inf

    def test_built_formulation_round_trip(self, toy_net, tmp_path):
        scen = generate_risk_scenario(toy_net, 3)
        inst, _ = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_S)
        path = tmp_path / "toy.json"
        inst.save(path)
        again = ConicMipInstance.load(path)
        assert again.n_vars == inst.n_vars
        assert again.n_rows == inst.n_rows
        assert again.n_cones == inst.n_cones
        path2 = tmp_path / "toy2.json"
        again.save(path2)
        assert path.read_text() == path2.read_text()

    def test_truncated_file_errors(self, tmp_path):
        inst = small_instance()
        path = tmp_path / "broken.json"
        inst.save(path)
        path.write_text(path.read_text()[: 100])
        with pytest.raises(InstanceError, match="malformed"):
            ConicMipInstance.load(path)

    def test_version_mismatch(self, tmp_path):
        inst = small_instance()
        path = tmp_path / "v.json"
        inst.save(path)
        data = json.loads(path.read_text())
        data["version"] = 99
        path.write_text(json.dumps(data))
        with pytest.raises(InstanceError, match="version"):
            ConicMipInstance.load(path)

    def test_case14_perspective_cone_census(self, case14_net, tmp_path):
        scen = generate_risk_scenario(case14_net, 1)
        inst, _ = build_formulation(case14_net, scen, 0.5, FormulationKind.SOC_OPS_P)
        path = tmp_path / "c14.json"
        inst.save(path)
        again = ConicMipInstance.load(path)
        # one voltage + two thermal memberships per line
        assert again.n_cones == 3 * len(case14_net.lines) == 60


class TestLpExport:
    def test_export_rejects_cones(self, tmp_path):
        with pytest.raises(InstanceError, match="cones"):
            small_instance().to_lp_file(tmp_path / "x.lp")

    def test_linear_kind_exports(self, toy_net, tmp_path):
        scen = generate_risk_scenario(toy_net, 1)
        inst, _ = build_formulation(toy_net, scen, 0.5, FormulationKind.SOC_OPS_M)
        path = tmp_path / "toy_m.lp"
        inst.to_lp_file(path)
        text = path.read_text()
        assert text.startswith("\\ case3_shutoff:soc-ops-m\nMaximize")
        assert "Binaries" in text
        assert "End" in text
        # every binary switch is declared
        assert "z_bus_1" in text and "z_line_3" in text
