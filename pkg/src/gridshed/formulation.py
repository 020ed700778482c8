"""Builders for the shutoff optimization models.

Six formulations share one variable map and most constraint blocks:

* ``SOC_OPS``      exact model, product-relaxed voltage cones (three per line)
* ``SOC_OPS_P``    exact model, single perspective voltage cone per line
* ``SOC_OPS_T``    perspective voltage cone, tangent-cut linearized thermal
* ``SOC_OPS_M``    fully linear: tangent cuts plus McCormick voltage envelope
* ``SOC_OPS_S``    fully linear: tangent cuts plus secant voltage bound
* ``DC_OPS``       real-power-only MILP with big-M angle/flow coupling

``REDISPATCH`` is the continuous load-maximization restriction of
``SOC_OPS_P`` with every switching decision frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from . import cuts
from .cuts import LineBounds, Row, add_rows
from .instance import ConeSide, ConicMipInstance
from .network import Network, RiskScenario


class FormulationError(ValueError):
    pass


class FormulationKind(Enum):
    SOC_OPS = "soc-ops"
    SOC_OPS_P = "soc-ops-p"
    SOC_OPS_T = "soc-ops-t"
    SOC_OPS_M = "soc-ops-m"
    SOC_OPS_S = "soc-ops-s"
    DC_OPS = "dc-ops"
    REDISPATCH = "redispatch"

    @staticmethod
    def parse(label: str) -> "FormulationKind":
        for kind in FormulationKind:
            if kind.value == label.lower():
                return kind
        raise FormulationError(
            f"unknown formulation {label!r}; choose from "
            + ", ".join(k.value for k in FormulationKind)
        )


SOC_FAMILY = (
    FormulationKind.SOC_OPS,
    FormulationKind.SOC_OPS_P,
    FormulationKind.SOC_OPS_T,
    FormulationKind.SOC_OPS_M,
    FormulationKind.SOC_OPS_S,
)
LINEARIZED_THERMAL = (FormulationKind.SOC_OPS_T, FormulationKind.SOC_OPS_M,
                      FormulationKind.SOC_OPS_S)


@dataclass
class VariableMap:
    """Column indices for every physical symbol of the selected formulation."""

    kind: FormulationKind
    z_bus: dict = field(default_factory=dict)
    z_line: dict = field(default_factory=dict)
    z_gen: dict = field(default_factory=dict)
    x_load: dict = field(default_factory=dict)
    x_shunt: dict = field(default_factory=dict)
    p_gen: dict = field(default_factory=dict)
    q_gen: dict = field(default_factory=dict)
    p_flow: dict = field(default_factory=dict)   # (line id, "fr"|"to") -> col
    q_flow: dict = field(default_factory=dict)
    w_bus: dict = field(default_factory=dict)
    w_fr: dict = field(default_factory=dict)
    w_to: dict = field(default_factory=dict)
    w_r: dict = field(default_factory=dict)
    w_i: dict = field(default_factory=dict)
    w_shunt: dict = field(default_factory=dict)
    y_p: dict = field(default_factory=dict)
    y_q: dict = field(default_factory=dict)
    y_wr: dict = field(default_factory=dict)
    y_wi: dict = field(default_factory=dict)
    y_wsum: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)  # line id -> LineBounds

    def binary_cols(self) -> list[int]:
        return list(self.z_bus.values()) + list(self.z_line.values()) + list(self.z_gen.values())

    def load_term(self, net: Network, x) -> float:
        """Weighted delivered real power (per unit) at a point."""
        return float(sum(d.weight * d.pd * x[self.x_load[d.id]] for d in net.loads))

    def extract_binaries(self, x, tol: float = 1e-6) -> dict:
        """Round the switching variables of a point to a {0,1} assignment."""
        out = {"bus": {}, "line": {}, "gen": {}}
        groups = (("bus", self.z_bus), ("line", self.z_line), ("gen", self.z_gen))
        for label, mapping in groups:
            for key, col in mapping.items():
                val = float(x[col])
                if abs(val - round(val)) > tol:
                    raise FormulationError(
                        f"z_{label}[{key}] = {val} is not integral within {tol}"
                    )
                out[label][key] = int(round(val))
        return out


def derive_bounds(net: Network) -> dict[int, LineBounds]:
    """Boxes for the voltage-product variables of every line (energized state)."""
    out = {}
    for ln in net.lines:
        bi, bj = net.bus(ln.from_bus), net.bus(ln.to_bus)
        theta_max = max(abs(ln.angle_min), abs(ln.angle_max))
        vv_hi = bi.vmax * bj.vmax
        out[ln.id] = LineBounds(
            wfr_lo=bi.vmin**2,
            wfr_hi=bi.vmax**2,
            wto_lo=bj.vmin**2,
            wto_hi=bj.vmax**2,
            wr_lo=bi.vmin * bj.vmin * math.cos(theta_max),
            wr_hi=vv_hi,
            wi_lo=vv_hi * math.sin(ln.angle_min),
            wi_hi=vv_hi * math.sin(ln.angle_max),
        )
    return out


# --------------------------------------------------------------- objective


def build_objective(net: Network, scenario: RiskScenario | None, alpha: float,
                    vmap: VariableMap) -> dict:
    """Column -> coefficient map of the load-vs-risk objective (maximize)."""
    if not 0.0 <= alpha <= 1.0:
        raise FormulationError(f"alpha must be in [0, 1], got {alpha}")
    p_tot = net.total_weighted_demand
    if p_tot <= 0:
        raise FormulationError("total weighted demand must be positive")
    risk = net.line_risk(scenario)
    r_tot = float(risk.sum())
    if r_tot <= 0:
        raise FormulationError("total risk must be positive")
    coeffs = {}
    for d in net.loads:
        coeffs[vmap.x_load[d.id]] = (1.0 - alpha) * d.weight * d.pd / p_tot
    for ln, r in zip(net.lines, risk):
        coeffs[vmap.z_line[ln.id]] = coeffs.get(vmap.z_line[ln.id], 0.0) - alpha * r / r_tot
    return coeffs


# ------------------------------------------------------------- constraint blocks


def build_energization(net: Network, vmap: VariableMap) -> list[Row]:
    """Components may only be energized when their bus is: z_g <= z_i,
    z_ij <= z_i, z_ij <= z_j, x_d <= z_i, x_s <= z_i."""
    rows = []

    def leq(small, big, name):
        rows.append(Row(cols=(small, big), vals=(1.0, -1.0), sense="<=", rhs=0.0, name=name))

    for g in net.generators:
        leq(vmap.z_gen[g.id], vmap.z_bus[g.bus], f"en_gen[{g.id}]")
    for ln in net.lines:
        leq(vmap.z_line[ln.id], vmap.z_bus[ln.from_bus], f"en_line_fr[{ln.id}]")
        leq(vmap.z_line[ln.id], vmap.z_bus[ln.to_bus], f"en_line_to[{ln.id}]")
    for d in net.loads:
        leq(vmap.x_load[d.id], vmap.z_bus[d.bus], f"en_load[{d.id}]")
    for s in net.shunts:
        if s.id in vmap.x_shunt:
            leq(vmap.x_shunt[s.id], vmap.z_bus[s.bus], f"en_shunt[{s.id}]")
    return rows


def build_generation(net: Network, vmap: VariableMap, reactive: bool = True) -> list[Row]:
    """Dispatch boxes scaled by the generator switch: z P_lo <= P <= z P_hi."""
    rows = []
    for g in net.generators:
        z = vmap.z_gen[g.id]
        rows.append(Row(cols=(vmap.p_gen[g.id], z), vals=(1.0, -g.pmax), sense="<=", rhs=0.0,
                        name=f"genp_hi[{g.id}]"))
        rows.append(Row(cols=(vmap.p_gen[g.id], z), vals=(1.0, -g.pmin), sense=">=", rhs=0.0,
                        name=f"genp_lo[{g.id}]"))
        if reactive:
            rows.append(Row(cols=(vmap.q_gen[g.id], z), vals=(1.0, -g.qmax), sense="<=", rhs=0.0,
                            name=f"genq_hi[{g.id}]"))
            rows.append(Row(cols=(vmap.q_gen[g.id], z), vals=(1.0, -g.qmin), sense=">=", rhs=0.0,
                            name=f"genq_lo[{g.id}]"))
    return rows


def build_power_balance(net: Network, vmap: VariableMap) -> list[Row]:
    """Nodal real/reactive balance plus the shunt-voltage McCormick rows."""
    rows = []
    for bus in net.buses:
        pc, pv, qc, qv = [], [], [], []
        for g in net.gens_at(bus.id):
            pc.append(vmap.p_gen[g.id]); pv.append(1.0)
            qc.append(vmap.q_gen[g.id]); qv.append(1.0)
        for ln in net.lines:
            if ln.from_bus == bus.id:
                pc.append(vmap.p_flow[ln.id, "fr"]); pv.append(-1.0)
                qc.append(vmap.q_flow[ln.id, "fr"]); qv.append(-1.0)
            if ln.to_bus == bus.id:
                pc.append(vmap.p_flow[ln.id, "to"]); pv.append(-1.0)
                qc.append(vmap.q_flow[ln.id, "to"]); qv.append(-1.0)
        for d in net.loads_at(bus.id):
            pc.append(vmap.x_load[d.id]); pv.append(-d.pd)
            qc.append(vmap.x_load[d.id]); qv.append(-d.qd)
        for s in net.shunts_at(bus.id):
            pc.append(vmap.w_shunt[s.id]); pv.append(-s.gs)
            qc.append(vmap.w_shunt[s.id]); qv.append(s.bs)
        rows.append(Row(cols=tuple(pc), vals=tuple(pv), sense="==", rhs=0.0,
                        name=f"balance_p[{bus.id}]"))
        rows.append(Row(cols=tuple(qc), vals=tuple(qv), sense="==", rhs=0.0,
                        name=f"balance_q[{bus.id}]"))

    # McCormick rows tying the shunt voltage ws to x_s * w_ii
    for s in net.shunts:
        ws, xs, w = vmap.w_shunt[s.id], vmap.x_shunt[s.id], vmap.w_bus[s.bus]
        vmax_sq = net.bus(s.bus).vmax ** 2
        rows.append(Row(cols=(ws,), vals=(1.0,), sense=">=", rhs=0.0, name=f"ws_pos[{s.id}]"))
        rows.append(Row(cols=(ws, xs, w), vals=(1.0, -vmax_sq, -1.0), sense=">=", rhs=-vmax_sq,
                        name=f"ws_lo[{s.id}]"))
        rows.append(Row(cols=(ws, w), vals=(1.0, -1.0), sense="<=", rhs=0.0,
                        name=f"ws_cap_w[{s.id}]"))
        rows.append(Row(cols=(ws, xs), vals=(1.0, -vmax_sq), sense="<=", rhs=0.0,
                        name=f"ws_cap_x[{s.id}]"))
    return rows


def build_branch_flow(net: Network, vmap: VariableMap) -> list[Row]:
    """Line power flow in the lifted voltage variables.

    The from side carries the transformer, so its admittance terms divide by
    the squared tap magnitude; the to-side expressions use the conjugate tap,
    which flips the sign of the imaginary voltage-product term relative to
    the from side. No line switch appears here: all four voltage variables
    collapse to zero through their bound rows when the line opens.
    """
    rows = []
    for ln in net.lines:
        tm2 = ln.tap_sq
        if tm2 <= 0:
            raise FormulationError(f"line {ln.id}: zero tap magnitude")
        g, b, tr, ti = ln.g, ln.b, ln.tap_re, ln.tap_im
        wfr, wto, wr, wi = vmap.w_fr[ln.id], vmap.w_to[ln.id], vmap.w_r[ln.id], vmap.w_i[ln.id]
        rows.append(Row(
            cols=(vmap.p_flow[ln.id, "fr"], wfr, wr, wi),
            vals=(-1.0, (g + ln.g_fr) / tm2, (-g * tr + b * ti) / tm2, (-b * tr - g * ti) / tm2),
            sense="==", rhs=0.0, name=f"flow_p_fr[{ln.id}]"))
        rows.append(Row(
            cols=(vmap.q_flow[ln.id, "fr"], wfr, wr, wi),
            vals=(-1.0, -(b + ln.b_fr) / tm2, -(-b * tr - g * ti) / tm2, (-g * tr + b * ti) / tm2),
            sense="==", rhs=0.0, name=f"flow_q_fr[{ln.id}]"))
        rows.append(Row(
            cols=(vmap.p_flow[ln.id, "to"], wto, wr, wi),
            vals=(-1.0, g + ln.g_to, (-g * tr - b * ti) / tm2, (b * tr - g * ti) / tm2),
            sense="==", rhs=0.0, name=f"flow_p_to[{ln.id}]"))
        rows.append(Row(
            cols=(vmap.q_flow[ln.id, "to"], wto, wr, wi),
            vals=(-1.0, -(b + ln.b_to), -(-b * tr + g * ti) / tm2, (g * tr + b * ti) / tm2),
            sense="==", rhs=0.0, name=f"flow_q_to[{ln.id}]"))
    return rows


def build_voltage_block(net: Network, vmap: VariableMap, kind: FormulationKind,
                        inst: ConicMipInstance) -> list[Row]:
    """Voltage bounds, switch coupling, angle rows, and the per-kind cones.

    Adds the cone memberships straight to ``inst`` and returns the linear
    rows for the caller to add (same pattern as every other block).
    """
    rows = []
    for bus in net.buses:
        z, w = vmap.z_bus[bus.id], vmap.w_bus[bus.id]
        rows.append(Row(cols=(w, z), vals=(1.0, -bus.vmax**2), sense="<=", rhs=0.0,
                        name=f"wbus_hi[{bus.id}]"))
        rows.append(Row(cols=(w, z), vals=(1.0, -bus.vmin**2), sense=">=", rhs=0.0,
                        name=f"wbus_lo[{bus.id}]"))
    for ln in net.lines:
        z = vmap.z_line[ln.id]
        box = vmap.derived[ln.id]
        wfr, wto, wr, wi = vmap.w_fr[ln.id], vmap.w_to[ln.id], vmap.w_r[ln.id], vmap.w_i[ln.id]
        wii, wjj = vmap.w_bus[ln.from_bus], vmap.w_bus[ln.to_bus]

        rows.append(Row(cols=(wfr, z), vals=(1.0, -box.wfr_hi), sense="<=", rhs=0.0,
                        name=f"wfr_hi[{ln.id}]"))
        rows.append(Row(cols=(wfr, z), vals=(1.0, -box.wfr_lo), sense=">=", rhs=0.0,
                        name=f"wfr_lo[{ln.id}]"))
        rows.append(Row(cols=(wto, z), vals=(1.0, -box.wto_hi), sense="<=", rhs=0.0,
                        name=f"wto_hi[{ln.id}]"))
        rows.append(Row(cols=(wto, z), vals=(1.0, -box.wto_lo), sense=">=", rhs=0.0,
                        name=f"wto_lo[{ln.id}]"))

        # equal to the nodal voltage when closed, free to drop to 0 when open
        rows.append(Row(cols=(wfr, wii), vals=(1.0, -1.0), sense="<=", rhs=0.0,
                        name=f"wfr_link_hi[{ln.id}]"))
        rows.append(Row(cols=(wfr, wii, z), vals=(1.0, -1.0, -box.wfr_hi), sense=">=",
                        rhs=-box.wfr_hi, name=f"wfr_link_lo[{ln.id}]"))
        rows.append(Row(cols=(wto, wjj), vals=(1.0, -1.0), sense="<=", rhs=0.0,
                        name=f"wto_link_hi[{ln.id}]"))
        rows.append(Row(cols=(wto, wjj, z), vals=(1.0, -1.0, -box.wto_hi), sense=">=",
                        rhs=-box.wto_hi, name=f"wto_link_lo[{ln.id}]"))

        rows.append(Row(cols=(wr, z), vals=(1.0, -box.wr_hi), sense="<=", rhs=0.0,
                        name=f"wr_hi[{ln.id}]"))
        rows.append(Row(cols=(wr, z), vals=(1.0, -box.wr_lo), sense=">=", rhs=0.0,
                        name=f"wr_lo[{ln.id}]"))
        rows.append(Row(cols=(wi, z), vals=(1.0, -box.wi_hi), sense="<=", rhs=0.0,
                        name=f"wi_hi[{ln.id}]"))
        rows.append(Row(cols=(wi, z), vals=(1.0, -box.wi_lo), sense=">=", rhs=0.0,
                        name=f"wi_lo[{ln.id}]"))

        rows.append(Row(cols=(wi, wr), vals=(1.0, -math.tan(ln.angle_max)), sense="<=", rhs=0.0,
                        name=f"angle_hi[{ln.id}]"))
        rows.append(Row(cols=(wi, wr), vals=(1.0, -math.tan(ln.angle_min)), sense=">=", rhs=0.0,
                        name=f"angle_lo[{ln.id}]"))

        if kind == FormulationKind.SOC_OPS:
            inst.add_cone(wr, wi, ConeSide(wii), ConeSide(wjj), f"vprod_ww[{ln.id}]")
            inst.add_cone(wr, wi, ConeSide(wii), ConeSide(z, box.wto_hi), f"vprod_wz[{ln.id}]")
            inst.add_cone(wr, wi, ConeSide(z, box.wfr_hi), ConeSide(wjj), f"vprod_zw[{ln.id}]")
        elif kind in (FormulationKind.SOC_OPS_P, FormulationKind.SOC_OPS_T,
                      FormulationKind.REDISPATCH):
            inst.add_cone(wr, wi, ConeSide(wfr), ConeSide(wto), f"vcone[{ln.id}]")
    return rows


def build_thermal_cones(net: Network, vmap: VariableMap, inst: ConicMipInstance):
    """Per-direction memberships p^2 + q^2 <= (T z)^2.

    For binary z this equals the T^2 z budget; for fractional z it is the
    slightly tighter squared form, which strengthens the root relaxation.
    """
    for ln in net.lines:
        z = vmap.z_line[ln.id]
        for side in ("fr", "to"):
            inst.add_cone(
                vmap.p_flow[ln.id, side],
                vmap.q_flow[ln.id, side],
                ConeSide(z, ln.rate),
                ConeSide(z, ln.rate),
                f"thermal[{ln.id},{side}]",
            )


# ----------------------------------------------------------- variable layout


def _allocate_soc_variables(inst: ConicMipInstance, net: Network, vmap: VariableMap,
                            kind: FormulationKind):
    for bus in net.buses:
        vmap.z_bus[bus.id] = inst.add_variable(f"z_bus[{bus.id}]", 0, 1, integer=True)
    for ln in net.lines:
        vmap.z_line[ln.id] = inst.add_variable(f"z_line[{ln.id}]", 0, 1, integer=True)
    for g in net.generators:
        vmap.z_gen[g.id] = inst.add_variable(f"z_gen[{g.id}]", 0, 1, integer=True)
    for d in net.loads:
        vmap.x_load[d.id] = inst.add_variable(f"x_load[{d.id}]", 0, 1)
    for s in net.shunts:
        vmap.x_shunt[s.id] = inst.add_variable(f"x_shunt[{s.id}]", 0, 1)
    for g in net.generators:
        vmap.p_gen[g.id] = inst.add_variable(f"pg[{g.id}]", min(0.0, g.pmin), max(0.0, g.pmax))
        vmap.q_gen[g.id] = inst.add_variable(f"qg[{g.id}]", min(0.0, g.qmin), max(0.0, g.qmax))
    for ln in net.lines:
        for side in ("fr", "to"):
            vmap.p_flow[ln.id, side] = inst.add_variable(f"p[{ln.id},{side}]", -ln.rate, ln.rate)
            vmap.q_flow[ln.id, side] = inst.add_variable(f"q[{ln.id},{side}]", -ln.rate, ln.rate)
    for bus in net.buses:
        vmap.w_bus[bus.id] = inst.add_variable(f"w[{bus.id}]", 0.0, bus.vmax**2)
    for ln in net.lines:
        box = vmap.derived[ln.id]
        vmap.w_fr[ln.id] = inst.add_variable(f"wfr[{ln.id}]", 0.0, box.wfr_hi)
        vmap.w_to[ln.id] = inst.add_variable(f"wto[{ln.id}]", 0.0, box.wto_hi)
        vmap.w_r[ln.id] = inst.add_variable(f"wr[{ln.id}]", min(0.0, box.wr_lo), box.wr_hi)
        vmap.w_i[ln.id] = inst.add_variable(f"wi[{ln.id}]", min(0.0, box.wi_lo),
                                            max(0.0, box.wi_hi))
    for s in net.shunts:
        vmap.w_shunt[s.id] = inst.add_variable(f"ws[{s.id}]", 0.0, net.bus(s.bus).vmax ** 2)

    if kind in LINEARIZED_THERMAL:
        for ln in net.lines:
            for side in ("fr", "to"):
                tsq = ln.rate * ln.rate
                vmap.y_p[ln.id, side] = inst.add_variable(f"yp[{ln.id},{side}]", 0.0, tsq)
                vmap.y_q[ln.id, side] = inst.add_variable(f"yq[{ln.id},{side}]", 0.0, tsq)
    if kind in (FormulationKind.SOC_OPS_M, FormulationKind.SOC_OPS_S):
        for ln in net.lines:
            box = vmap.derived[ln.id]
            vmap.y_wr[ln.id] = inst.add_variable(
                f"ywr[{ln.id}]", 0.0, max(box.wr_lo**2, box.wr_hi**2))
            vmap.y_wi[ln.id] = inst.add_variable(
                f"ywi[{ln.id}]", 0.0, max(box.wi_lo**2, box.wi_hi**2))
    if kind == FormulationKind.SOC_OPS_S:
        for ln in net.lines:
            box = vmap.derived[ln.id]
            d_max = max(abs(box.diff_lo), abs(box.diff_hi))
            vmap.y_wsum[ln.id] = inst.add_variable(f"ywsum[{ln.id}]", 0.0, (d_max / 2.0) ** 2)


def _require_sanitized(net: Network):
    bad = [d.id for d in net.loads if d.pd < 0]
    if bad:
        raise FormulationError(
            f"loads {bad} have negative real power; run sanitize_negative_loads first"
        )


# ------------------------------------------------------------ full builders


def build_formulation(net: Network, scenario: RiskScenario | None, alpha: float,
                      kind: FormulationKind, lin_points: int = 5
                      ) -> tuple[ConicMipInstance, VariableMap]:
    """Assemble the instance for one formulation kind."""
    if kind == FormulationKind.REDISPATCH:
        raise FormulationError("use build_redispatch for the redispatch problem")
    if kind == FormulationKind.DC_OPS:
        return build_dc_ops(net, scenario, alpha)
    _require_sanitized(net)

    inst = ConicMipInstance(f"{net.name}:{kind.value}")
    vmap = VariableMap(kind=kind, derived=derive_bounds(net))
    _allocate_soc_variables(inst, net, vmap, kind)

    inst.set_objective(build_objective(net, scenario, alpha, vmap), maximize=True)
    add_rows(inst, build_energization(net, vmap))
    add_rows(inst, build_generation(net, vmap))
    add_rows(inst, build_power_balance(net, vmap))
    add_rows(inst, build_branch_flow(net, vmap))
    add_rows(inst, build_voltage_block(net, vmap, kind, inst))

    if kind in (FormulationKind.SOC_OPS, FormulationKind.SOC_OPS_P):
        build_thermal_cones(net, vmap, inst)
    else:
        add_rows(inst, cuts.thermal_linearization(net, vmap, lin_points))
    if kind in (FormulationKind.SOC_OPS_M, FormulationKind.SOC_OPS_S):
        add_rows(inst, cuts.voltage_quadratic_cuts(net, vmap, lin_points))
    if kind == FormulationKind.SOC_OPS_M:
        add_rows(inst, cuts.mccormick_voltage(net, vmap))
    if kind == FormulationKind.SOC_OPS_S:
        add_rows(inst, cuts.secant_voltage(net, vmap, lin_points))

    errors = inst.validate()
    if errors:
        raise FormulationError("built an invalid instance: " + "; ".join(errors))
    return inst, vmap


def build_dc_ops(net: Network, scenario: RiskScenario | None, alpha: float
                 ) -> tuple[ConicMipInstance, VariableMap]:
    """Real-power MILP with bus angles and big-M switch deactivation.

    Flow coupling uses p = -b (theta_i - theta_j) on closed lines; on open
    lines the equation relaxes with M = |b| (angle_max - angle_min) and the
    angle-difference window widens to that same span, so islands stay
    loosely coupled but the LP remains bounded.
    """
    _require_sanitized(net)
    inst = ConicMipInstance(f"{net.name}:dc-ops")
    vmap = VariableMap(kind=FormulationKind.DC_OPS)

    for bus in net.buses:
        vmap.z_bus[bus.id] = inst.add_variable(f"z_bus[{bus.id}]", 0, 1, integer=True)
    for ln in net.lines:
        vmap.z_line[ln.id] = inst.add_variable(f"z_line[{ln.id}]", 0, 1, integer=True)
    for g in net.generators:
        vmap.z_gen[g.id] = inst.add_variable(f"z_gen[{g.id}]", 0, 1, integer=True)
    for d in net.loads:
        vmap.x_load[d.id] = inst.add_variable(f"x_load[{d.id}]", 0, 1)
    for g in net.generators:
        vmap.p_gen[g.id] = inst.add_variable(f"pg[{g.id}]", min(0.0, g.pmin), max(0.0, g.pmax))
    for ln in net.lines:
        vmap.p_flow[ln.id, "fr"] = inst.add_variable(f"p[{ln.id}]", -ln.rate, ln.rate)
    for bus in net.buses:
        vmap.theta[bus.id] = inst.add_variable(f"theta[{bus.id}]", -math.inf, math.inf)

    inst.set_objective(build_objective(net, scenario, alpha, vmap), maximize=True)

    rows = []
    for g in net.generators:
        rows.append(Row(cols=(vmap.z_gen[g.id], vmap.z_bus[g.bus]), vals=(1.0, -1.0),
                        sense="<=", rhs=0.0, name=f"en_gen[{g.id}]"))
    for ln in net.lines:
        rows.append(Row(cols=(vmap.z_line[ln.id], vmap.z_bus[ln.from_bus]), vals=(1.0, -1.0),
                        sense="<=", rhs=0.0, name=f"en_line_fr[{ln.id}]"))
        rows.append(Row(cols=(vmap.z_line[ln.id], vmap.z_bus[ln.to_bus]), vals=(1.0, -1.0),
                        sense="<=", rhs=0.0, name=f"en_line_to[{ln.id}]"))
    for d in net.loads:
        rows.append(Row(cols=(vmap.x_load[d.id], vmap.z_bus[d.bus]), vals=(1.0, -1.0),
                        sense="<=", rhs=0.0, name=f"en_load[{d.id}]"))
    rows += build_generation(net, vmap, reactive=False)

    for bus in net.buses:
        pc, pv = [], []
        for g in net.gens_at(bus.id):
            pc.append(vmap.p_gen[g.id]); pv.append(1.0)
        for ln in net.lines:
            if ln.from_bus == bus.id:
                pc.append(vmap.p_flow[ln.id, "fr"]); pv.append(-1.0)
            if ln.to_bus == bus.id:
                pc.append(vmap.p_flow[ln.id, "fr"]); pv.append(1.0)
        for d in net.loads_at(bus.id):
            pc.append(vmap.x_load[d.id]); pv.append(-d.pd)
        rows.append(Row(cols=tuple(pc), vals=tuple(pv), sense="==", rhs=0.0,
                        name=f"balance_p[{bus.id}]"))

    for ln in net.lines:
        z = vmap.z_line[ln.id]
        p = vmap.p_flow[ln.id, "fr"]
        ti, tj = vmap.theta[ln.from_bus], vmap.theta[ln.to_bus]
        span = ln.angle_max - ln.angle_min
        big_m = abs(ln.b) * span
        # p + b (theta_i - theta_j) = 0 when closed, |.| <= M when open
        rows.append(Row(cols=(p, ti, tj, z), vals=(1.0, ln.b, -ln.b, big_m), sense="<=",
                        rhs=big_m, name=f"dcflow_hi[{ln.id}]"))
        rows.append(Row(cols=(p, ti, tj, z), vals=(1.0, ln.b, -ln.b, -big_m), sense=">=",
                        rhs=-big_m, name=f"dcflow_lo[{ln.id}]"))
        rows.append(Row(cols=(p, z), vals=(1.0, -ln.rate), sense="<=", rhs=0.0,
                        name=f"dcrate_hi[{ln.id}]"))
        rows.append(Row(cols=(p, z), vals=(1.0, ln.rate), sense=">=", rhs=0.0,
                        name=f"dcrate_lo[{ln.id}]"))
        # angle window: [angle_min, angle_max] closed, +-span open
        rows.append(Row(cols=(ti, tj, z), vals=(1.0, -1.0, -ln.angle_min), sense="<=",
                        rhs=span, name=f"dcangle_hi[{ln.id}]"))
        rows.append(Row(cols=(ti, tj, z), vals=(1.0, -1.0, -ln.angle_max), sense=">=",
                        rhs=-span, name=f"dcangle_lo[{ln.id}]"))
    add_rows(inst, rows)

    errors = inst.validate()
    if errors:
        raise FormulationError("built an invalid instance: " + "; ".join(errors))
    return inst, vmap


def validate_binary_assignment(net: Network, fixed: dict):
    """Check a {bus|line|gen -> {id -> 0/1}} assignment covers everything and
    respects the energization ordering."""
    for label, ids in (("bus", [b.id for b in net.buses]),
                       ("line", [ln.id for ln in net.lines]),
                       ("gen", [g.id for g in net.generators])):
        got = fixed.get(label, {})
        missing = [i for i in ids if i not in got]
        if missing:
            raise FormulationError(f"assignment missing z_{label} for {missing}")
        bad = {i: v for i, v in got.items() if v not in (0, 1)}
        if bad:
            raise FormulationError(f"non-binary z_{label} values: {bad}")
    for g in net.generators:
        if fixed["gen"][g.id] > fixed["bus"][g.bus]:
            raise FormulationError(
                f"generator {g.id} energized while its bus {g.bus} is off")
    for ln in net.lines:
        if fixed["line"][ln.id] > min(fixed["bus"][ln.from_bus], fixed["bus"][ln.to_bus]):
            raise FormulationError(
                f"line {ln.id} energized while one of its buses is off")


def build_redispatch(net: Network, fixed: dict, lin_points: int = 5
                     ) -> tuple[ConicMipInstance, VariableMap]:
    """Continuous load-maximization with the switching decisions frozen.

    All perspective-cone constraints are kept; the objective is the
    normalized weighted load delivery alone.
    """
    validate_binary_assignment(net, fixed)
    inst, vmap = build_formulation(net, None, alpha=0.0, kind=FormulationKind.SOC_OPS_P,
                                   lin_points=lin_points)
    inst.name = f"{net.name}:redispatch"
    vmap.kind = FormulationKind.REDISPATCH
    for label, mapping in (("bus", vmap.z_bus), ("line", vmap.z_line), ("gen", vmap.z_gen)):
        for key, col in mapping.items():
            val = float(fixed[label][key])
            inst.lo[col] = val
            inst.hi[col] = val
    return inst, vmap
