"""Linear surrogates for the quadratic terms: tangent cuts, McCormick
envelopes, secant bounds, and supporting-hyperplane cuts for rotated cones.

All generators return plain :class:`Row` records so they can be inspected
and tested without an instance; callers add them with :func:`add_rows`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instance import ConeSide, ConicMipInstance, RotatedCone


class CutError(ValueError):
    pass


@dataclass(frozen=True)
class Row:
    cols: tuple
    vals: tuple
    sense: str
    rhs: float
    name: str = ""


def add_rows(inst: ConicMipInstance, rows) -> list[int]:
    return [inst.add_row(r.cols, r.vals, r.sense, r.rhs, r.name) for r in rows]


@dataclass(frozen=True)
class LineBounds:
    """Box data for one line's voltage-product variables when energized.

    ``wfr``/``wto`` are the squared end voltages, ``wr``/``wi`` the box for
    the voltage-product parts, and ``secant_lo``/``secant_hi`` the interval
    of the half-sum s = (wfr + wto) / 2 used by the secant overestimator.
    """

    wfr_lo: float
    wfr_hi: float
    wto_lo: float
    wto_hi: float
    wr_lo: float
    wr_hi: float
    wi_lo: float
    wi_hi: float

    @property
    def secant_lo(self) -> float:
        return 0.5 * (self.wfr_lo + self.wto_lo)

    @property
    def secant_hi(self) -> float:
        return 0.5 * (self.wfr_hi + self.wto_hi)

    @property
    def diff_lo(self) -> float:
        return self.wto_lo - self.wfr_hi

    @property
    def diff_hi(self) -> float:
        return self.wto_hi - self.wfr_lo


def refinement_points(lo: float, hi: float, count: int) -> list[float]:
    """Deterministic nested point grids on [lo, hi].

    The sequence starts with the endpoints and then inserts bisection
    midpoints level by level (left to right), so grids for growing counts
    are supersets of smaller ones and cuts only accumulate. Counts of the
    form 2^k + 1 (3, 5, 9, 17, ...) reproduce the uniform grid.
    """
    if count < 1:
        raise CutError("need at least one linearization point")
    if hi < lo:
        raise CutError(f"inverted interval [{lo}, {hi}]")
    if hi == lo:
        return [lo]
    seq = [lo, hi]
    level = [(lo, hi)]
    while len(seq) < count:
        nxt = []
        for a, b in level:
            m = 0.5 * (a + b)
            seq.append(m)
            nxt.extend([(a, m), (m, b)])
            if len(seq) >= count:
                break
        level = nxt
    return sorted(seq[:count])


def tangent_cuts(y_col: int, x_col: int, z_col: int, points, name: str = "tan") -> list[Row]:
    """Underestimator rows ``y >= 2 l x - l^2 z`` for each point l.

    Valid for y standing in for x^2 on any switched term: at z = 1 the cut
    is the tangent of x^2 at l, at z = 0 it degrades to y >= 2 l x, which
    holds because x is forced to 0 with its switch.
    """
    points = list(points)
    if not points:
        raise CutError("empty linearization point set")
    rows = []
    for k, l in enumerate(points):
        rows.append(
            Row(
                cols=(y_col, x_col, z_col),
                vals=(-1.0, 2.0 * l, -l * l),
                sense="<=",
                rhs=0.0,
                name=f"{name}[{k}]",
            )
        )
    return rows


def thermal_linearization(net, vmap, points_per_term: int) -> list[Row]:
    """Budget rows ``y_p + y_q <= T^2 z`` plus tangent cuts for both flow
    directions of every line, with points spread over [-T, T]."""
    rows = []
    for ln in net.lines:
        z = vmap.z_line[ln.id]
        tsq = ln.rate * ln.rate
        points = refinement_points(-ln.rate, ln.rate, points_per_term)
        for side in ("fr", "to"):
            yp, yq = vmap.y_p[ln.id, side], vmap.y_q[ln.id, side]
            rows.append(
                Row(
                    cols=(yp, yq, z),
                    vals=(1.0, 1.0, -tsq),
                    sense="<=",
                    rhs=0.0,
                    name=f"thermal_budget[{ln.id},{side}]",
                )
            )
            rows += tangent_cuts(
                yp, vmap.p_flow[ln.id, side], z, points, f"yp_cut[{ln.id},{side}]"
            )
            rows += tangent_cuts(
                yq, vmap.q_flow[ln.id, side], z, points, f"yq_cut[{ln.id},{side}]"
            )
    return rows


def voltage_quadratic_cuts(net, vmap, points_per_term: int) -> list[Row]:
    """Tangent cuts binding y_wr / y_wi to the squares of the voltage-product
    variables, with points over the energized boxes."""
    rows = []
    for ln in net.lines:
        z = vmap.z_line[ln.id]
        box = vmap.derived[ln.id]
        rows += tangent_cuts(
            vmap.y_wr[ln.id],
            vmap.w_r[ln.id],
            z,
            refinement_points(box.wr_lo, box.wr_hi, points_per_term),
            f"ywr_cut[{ln.id}]",
        )
        rows += tangent_cuts(
            vmap.y_wi[ln.id],
            vmap.w_i[ln.id],
            z,
            refinement_points(box.wi_lo, box.wi_hi, points_per_term),
            f"ywi_cut[{ln.id}]",
        )
    return rows


def mccormick_voltage(net, vmap) -> list[Row]:
    """Upper McCormick envelopes of the product wfr * wto capping y_wr + y_wi.

    The box is the switched one [0, vmax^2] x [0, vmax^2] (the product
    variables reach 0 whenever the line is open), so the two planes reduce
    to ``y_wr + y_wi <= wto_hi * wfr`` and ``<= wfr_hi * wto`` and the
    z-scaled corner constant vanishes.
    """
    rows = []
    for ln in net.lines:
        box = vmap.derived[ln.id]
        wfr, wto = vmap.w_fr[ln.id], vmap.w_to[ln.id]
        ysum_cols = (vmap.y_wr[ln.id], vmap.y_wi[ln.id])
        rows.append(
            Row(
                cols=ysum_cols + (wfr,),
                vals=(1.0, 1.0, -box.wto_hi),
                sense="<=",
                rhs=0.0,
                name=f"mccormick_a[{ln.id}]",
            )
        )
        rows.append(
            Row(
                cols=ysum_cols + (wto,),
                vals=(1.0, 1.0, -box.wfr_hi),
                sense="<=",
                rhs=0.0,
                name=f"mccormick_b[{ln.id}]",
            )
        )
    return rows


def secant_voltage(net, vmap, points_per_term: int) -> list[Row]:
    """Secant overestimator of the half-sum square plus tangent cuts for the
    half-difference square (variable y_wsum)."""
    rows = []
    for ln in net.lines:
        box = vmap.derived[ln.id]
        z = vmap.z_line[ln.id]
        wfr, wto = vmap.w_fr[ln.id], vmap.w_to[ln.id]
        # cuts for y_wsum >= l (wto - wfr) - l^2 z; tangency sits at the
        # un-halved difference d = 2l, so points span half the d-interval
        points = refinement_points(box.diff_lo / 2.0, box.diff_hi / 2.0, points_per_term)
        for k, l in enumerate(points):
            rows.append(
                Row(
                    cols=(vmap.y_wsum[ln.id], wto, wfr, z),
                    vals=(-1.0, l, -l, -l * l),
                    sense="<=",
                    rhs=0.0,
                    name=f"ywsum_cut[{ln.id}][{k}]",
                )
            )
        lo, hi = box.secant_lo, box.secant_hi
        rows.append(
            Row(
                cols=(vmap.y_wr[ln.id], vmap.y_wi[ln.id], vmap.y_wsum[ln.id], wfr, wto, z),
                vals=(1.0, 1.0, 1.0, -(hi + lo) / 2.0, -(hi + lo) / 2.0, lo * hi),
                sense="<=",
                rhs=0.0,
                name=f"secant[{ln.id}]",
            )
        )
    return rows


# ------------------------------------------------------------------ cones


def cone_cut_from_normal(cone: RotatedCone, n1: float, n2: float, n3: float,
                         name: str = "oa") -> Row:
    """Supporting hyperplane of a rotated cone from a unit normal.

    In the standard-form coordinates u = (x, y, (a - b)/2), t = (a + b)/2
    the cone is ||u|| <= t and every unit vector n yields the valid row
    ``n . u <= t``. Expanding the affine sides a, b gives a sparse row over
    the original columns.
    """
    coeffs: dict[int, float] = {}

    def bump(col, val):
        if col is not None and val != 0.0:
            coeffs[col] = coeffs.get(col, 0.0) + val

    bump(cone.x_col, n1)
    bump(cone.y_col, n2)
    fa, fb = (n3 - 1.0) / 2.0, (-n3 - 1.0) / 2.0
    bump(cone.a.col, cone.a.coef * fa)
    bump(cone.b.col, cone.b.coef * fb)
    rhs = -(cone.a.const * fa + cone.b.const * fb)
    cols, vals = zip(*sorted(coeffs.items()))
    return Row(cols=cols, vals=vals, sense="<=", rhs=rhs, name=name)


def axis_seed_cuts(cone: RotatedCone, name: str = "seed") -> list[Row]:
    """Initial outer approximation: +-x and +-y capped by (a+b)/2, plus the
    sign rows a >= 0 and b >= 0 the rotated cone implies."""
    rows = [
        cone_cut_from_normal(cone, 1.0, 0.0, 0.0, f"{name}.px"),
        cone_cut_from_normal(cone, -1.0, 0.0, 0.0, f"{name}.nx"),
        cone_cut_from_normal(cone, 0.0, 1.0, 0.0, f"{name}.py"),
        cone_cut_from_normal(cone, 0.0, -1.0, 0.0, f"{name}.ny"),
    ]
    for tag, side in (("a", cone.a), ("b", cone.b)):
        if side.col is not None:
            rows.append(
                Row(
                    cols=(side.col,),
                    vals=(-side.coef,),
                    sense="<=",
                    rhs=side.const,
                    name=f"{name}.{tag}pos",
                )
            )
    return rows


def ring_seed_cuts(cone: RotatedCone, directions: int = 8, name: str = "seed") -> list[Row]:
    """Axis seeds plus an equatorial ring of supporting hyperplanes.

    The ring normals (cos phi, sin phi, 0) outer-approximate the cone's
    cross section; for cones whose two radius sides coincide (thermal
    limits) they are exactly the polygonal relaxation of the flow disk.
    """
    rows = axis_seed_cuts(cone, name=name)
    for k in range(directions):
        phi = 2.0 * math.pi * k / directions
        n1, n2 = math.cos(phi), math.sin(phi)
        if abs(n1) < 1e-12 or abs(n2) < 1e-12:
            continue  # axis directions already present
        rows.append(cone_cut_from_normal(cone, n1, n2, 0.0, f"{name}.r{k}"))
    return rows


def lazy_cone_cut(point, cone: RotatedCone, tol: float = 1e-9,
                  lo=None, hi=None, name: str = "oa") -> list[Row]:
    """Separate a point from a rotated cone.

    Returns an empty list when the point satisfies the cone within ``tol``.
    When variable bounds prove the cone radius is stuck at zero, the rows
    returned pin the left-hand-side columns to zero instead of a gradient
    cut (the hyperplane degenerates there).
    """
    viol = cone.violation(point)
    if viol <= tol:
        return []

    if lo is not None and hi is not None:
        if _side_max(cone.a, lo, hi) <= tol or _side_max(cone.b, lo, hi) <= tol:
            return [
                Row(cols=(cone.x_col,), vals=(1.0,), sense="==", rhs=0.0, name=f"{name}.x0"),
                Row(cols=(cone.y_col,), vals=(1.0,), sense="==", rhs=0.0, name=f"{name}.y0"),
            ]

    av, bv = cone.a.value(point), cone.b.value(point)
    u = np.array([point[cone.x_col], point[cone.y_col], 0.5 * (av - bv)])
    norm = float(np.linalg.norm(u))
    if norm <= tol:
        # violation stems from a negative side; re-impose the sign rows
        rows = []
        for tag, side, val in (("a", cone.a, av), ("b", cone.b, bv)):
            if val < -tol and side.col is not None:
                rows.append(
                    Row(
                        cols=(side.col,),
                        vals=(-side.coef,),
                        sense="<=",
                        rhs=side.const,
                        name=f"{name}.{tag}pos",
                    )
                )
        return rows
    n1, n2, n3 = u / norm
    return [cone_cut_from_normal(cone, n1, n2, n3, name)]


def _side_max(side: ConeSide, lo, hi) -> float:
    if side.col is None:
        return side.const
    bound = hi[side.col] if side.coef > 0 else lo[side.col]
    return side.coef * bound + side.const
