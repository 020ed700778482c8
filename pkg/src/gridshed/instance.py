"""Standard-form mixed-integer conic instance.

The container holds dense variable bounds, an integrality mask, sparse
linear rows, rotated second-order-cone memberships, and a linear objective.
A rotated cone constrains ``x^2 + y^2 <= a * b`` where ``x``/``y`` are
columns and each of ``a``/``b`` is an affine single-column expression
(``coef * col + const``) with an implied sign restriction ``a, b >= 0``.

Instances are built incrementally, validated once, and treated as immutable
afterwards; solvers only layer node-local bound changes and extra cut rows
on top.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

FORMAT_NAME = "gridshed-conic-mip"
FORMAT_VERSION = 1

SENSES = ("<=", ">=", "==")


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class ConeSide:
    """Affine expression ``coef * x[col] + const`` (col None => constant)."""

    col: int | None
    coef: float = 1.0
    const: float = 0.0

    def value(self, x) -> float:
        if self.col is None:
            return self.const
        return self.coef * x[self.col] + self.const


@dataclass(frozen=True)
class RotatedCone:
    x_col: int
    y_col: int
    a: ConeSide
    b: ConeSide
    name: str = ""

    def violation(self, x) -> float:
        """Positive when the point is outside the cone."""
        av, bv = self.a.value(x), self.b.value(x)
        lhs = x[self.x_col] ** 2 + x[self.y_col] ** 2
        return max(lhs - av * bv, -av, -bv)


@dataclass
class PointCheck:
    max_linear: float
    max_cone: float
    max_bound: float
    max_integrality: float
    worst_row: str = ""
    worst_cone: str = ""

    def max_violation(self) -> float:
        return max(self.max_linear, self.max_cone, self.max_bound, self.max_integrality)

    def ok(self, tol: float) -> bool:
        return self.max_violation() <= tol


@dataclass
class SolveResult:
    """Outcome of a solve: status, incumbent, bound and search statistics.

    ``bound_history``/``incumbent_history`` trace the search (best bound is
    non-increasing, incumbent objective non-decreasing for maximization).
    """

    status: str                      # optimal | feasible_at_limit | infeasible | unbounded | error
    x: np.ndarray | None = None
    objective: float | None = None
    bound: float | None = None
    gap: float | None = None
    nodes: int = 0
    cuts: int = 0
    time_s: float = 0.0
    message: str = ""
    bound_history: list = field(default_factory=list)
    incumbent_history: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "feasible_at_limit") and self.x is not None


class ConicMipInstance:
    def __init__(self, name: str = ""):
        self.name = name
        self.var_names: list[str] = []
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.integer: list[bool] = []
        self.row_cols: list[np.ndarray] = []
        self.row_vals: list[np.ndarray] = []
        self.row_sense: list[str] = []
        self.row_rhs: list[float] = []
        self.row_names: list[str] = []
        self.cones: list[RotatedCone] = []
        self.obj: np.ndarray | None = None
        self.maximize = True
        self._col_of: dict[str, int] = {}
        self._lp_cache = None

    # ------------------------------------------------------------- building

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_rhs)

    @property
    def n_cones(self) -> int:
        return len(self.cones)

    def add_variable(self, name: str, lo: float, hi: float, integer: bool = False) -> int:
        if name in self._col_of:
            raise InstanceError(f"duplicate variable name {name!r}")
        col = len(self.var_names)
        self.var_names.append(name)
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        self.integer.append(bool(integer))
        self._col_of[name] = col
        return col

    def col_of(self, name: str) -> int:
        return self._col_of[name]

    def add_row(self, cols, vals, sense: str, rhs: float, name: str = "") -> int:
        if sense not in SENSES:
            raise InstanceError(f"unknown sense {sense!r}")
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if cols.shape != vals.shape:
            raise InstanceError(f"row {name!r}: cols/vals shape mismatch")
        self.row_cols.append(cols)
        self.row_vals.append(vals)
        self.row_sense.append(sense)
        self.row_rhs.append(float(rhs))
        self.row_names.append(name)
        self._lp_cache = None
        return len(self.row_rhs) - 1

    def add_cone(self, x_col: int, y_col: int, a: ConeSide, b: ConeSide, name: str = "") -> int:
        self.cones.append(RotatedCone(x_col, y_col, a, b, name))
        return len(self.cones) - 1

    def set_objective(self, coeffs, maximize: bool = True):
        c = np.zeros(self.n_vars)
        if isinstance(coeffs, dict):
            for col, v in coeffs.items():
                c[col] = v
        else:
            arr = np.asarray(coeffs, dtype=float)
            c[: arr.size] = arr
        self.obj = c
        self.maximize = maximize

    def integer_cols(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.integer))

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    # ----------------------------------------------------------- validation

    def validate(self) -> list[str]:
        """Collect structural violations; an empty list means well-formed."""
        errors = []
        n = self.n_vars
        for i, (lo, hi) in enumerate(zip(self.lo, self.hi)):
            if lo > hi:
                errors.append(f"variable {self.var_names[i]}: inverted bounds [{lo}, {hi}]")
        for ridx in range(self.n_rows):
            cols = self.row_cols[ridx]
            label = self.row_names[ridx] or f"row {ridx}"
            if cols.size and (cols.min() < 0 or cols.max() >= n):
                errors.append(f"{label}: column reference out of range")
            if not np.all(np.isfinite(self.row_vals[ridx])):
                errors.append(f"{label}: non-finite coefficient")
            if not math.isfinite(self.row_rhs[ridx]):
                errors.append(f"{label}: non-finite rhs")
        for cidx, cone in enumerate(self.cones):
            label = cone.name or f"cone {cidx}"
            refs = [cone.x_col, cone.y_col]
            for side in (cone.a, cone.b):
                if side.col is not None:
                    refs.append(side.col)
            if any(r < 0 or r >= n for r in refs):
                errors.append(f"{label}: column reference out of range")
            if cone.x_col == cone.y_col:
                errors.append(f"{label}: duplicate left-hand-side columns")
            if cone.x_col in (cone.a.col, cone.b.col) or cone.y_col in (cone.a.col, cone.b.col):
                errors.append(f"{label}: left-hand-side column reused on right-hand side")
        if self.obj is not None and self.obj.size != n:
            errors.append("objective length does not match variable count")
        return errors

    # ------------------------------------------------------- point checking

    def check_point(self, x, tol: float = 1e-6, integrality: bool = True) -> PointCheck:
        """Max violation per constraint class (linear, cone, bounds, integrality)."""
        x = np.asarray(x, dtype=float)
        if x.size != self.n_vars:
            raise InstanceError(f"point has {x.size} entries for {self.n_vars} variables")
        lo, hi = self.bounds_arrays()
        vb = np.maximum(lo - x, x - hi)
        max_bound = float(vb.max(initial=0.0))

        max_linear, worst_row = 0.0, ""
        for ridx in range(self.n_rows):
            lhs = float(self.row_vals[ridx] @ x[self.row_cols[ridx]])
            rhs = self.row_rhs[ridx]
            sense = self.row_sense[ridx]
            if sense == "<=":
                v = lhs - rhs
            elif sense == ">=":
                v = rhs - lhs
            else:
                v = abs(lhs - rhs)
            if v > max_linear:
                max_linear, worst_row = v, self.row_names[ridx] or f"row {ridx}"

        max_cone, worst_cone = 0.0, ""
        for cidx, cone in enumerate(self.cones):
            v = cone.violation(x)
            if v > max_cone:
                max_cone, worst_cone = v, cone.name or f"cone {cidx}"

        max_int = 0.0
        if integrality:
            icols = self.integer_cols()
            if icols.size:
                max_int = float(np.abs(x[icols] - np.round(x[icols])).max())

        return PointCheck(max_linear, max_cone, max_bound, max_int, worst_row, worst_cone)

    # ------------------------------------------------- solver-facing arrays

    def lp_arrays(self):
        """Split rows into (A_ub, b_ub, A_eq, b_eq) CSR form; cached."""
        if self._lp_cache is None:
            ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
            for ridx in range(self.n_rows):
                cols, vals = self.row_cols[ridx], self.row_vals[ridx]
                sense, rhs = self.row_sense[ridx], self.row_rhs[ridx]
                if sense == "<=":
                    ub_rows.append((cols, vals))
                    ub_rhs.append(rhs)
                elif sense == ">=":
                    ub_rows.append((cols, -vals))
                    ub_rhs.append(-rhs)
                else:
                    eq_rows.append((cols, vals))
                    eq_rhs.append(rhs)
            self._lp_cache = (
                _build_csr(ub_rows, self.n_vars),
                np.asarray(ub_rhs, dtype=float),
                _build_csr(eq_rows, self.n_vars),
                np.asarray(eq_rhs, dtype=float),
            )
        return self._lp_cache

    # --------------------------------------------------------- serialization

    def save(self, path):
        errors = self.validate()
        if errors:
            raise InstanceError("cannot serialize invalid instance: " + "; ".join(errors))
        payload = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "name": self.name,
            "variables": {
                "names": self.var_names,
                "lo": [_enc(v) for v in self.lo],
                "hi": [_enc(v) for v in self.hi],
                "integer": [i for i, flag in enumerate(self.integer) if flag],
            },
            "rows": [
                {
                    "cols": self.row_cols[r].tolist(),
                    "vals": self.row_vals[r].tolist(),
                    "sense": self.row_sense[r],
                    "rhs": self.row_rhs[r],
                    "name": self.row_names[r],
                }
                for r in range(self.n_rows)
            ],
            "cones": [
                {
                    "x": c.x_col,
                    "y": c.y_col,
                    "a": {"col": c.a.col, "coef": c.a.coef, "const": c.a.const},
                    "b": {"col": c.b.col, "coef": c.b.coef, "const": c.b.const},
                    "name": c.name,
                }
                for c in self.cones
            ],
            "objective": None
            if self.obj is None
            else {"coeffs": self.obj.tolist(), "maximize": self.maximize},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)

    @staticmethod
    def load(path) -> "ConicMipInstance":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InstanceError(f"malformed instance file: {exc}") from exc
        if data.get("format") != FORMAT_NAME:
            raise InstanceError("not a conic-mip instance file")
        if data.get("version") != FORMAT_VERSION:
            raise InstanceError(f"unsupported instance version {data.get('version')!r}")
        inst = ConicMipInstance(data.get("name", ""))
        var = data["variables"]
        integer = set(var["integer"])
        for i, name in enumerate(var["names"]):
            inst.add_variable(name, _dec(var["lo"][i]), _dec(var["hi"][i]), i in integer)
        for row in data["rows"]:
            inst.add_row(row["cols"], row["vals"], row["sense"], row["rhs"], row["name"])
        for cone in data["cones"]:
            inst.add_cone(
                cone["x"],
                cone["y"],
                ConeSide(cone["a"]["col"], cone["a"]["coef"], cone["a"]["const"]),
                ConeSide(cone["b"]["col"], cone["b"]["coef"], cone["b"]["const"]),
                cone["name"],
            )
        if data.get("objective") is not None:
            inst.set_objective(
                np.asarray(data["objective"]["coeffs"], dtype=float),
                data["objective"]["maximize"],
            )
        errors = inst.validate()
        if errors:
            raise InstanceError("loaded instance is invalid: " + "; ".join(errors))
        return inst

    # ------------------------------------------------------------- LP export

    def to_lp_file(self, path):
        """Write CPLEX LP format; only for fully linear instances."""
        if self.cones:
            raise InstanceError("LP export only supports instances without cones")
        out = [f"\\ {self.name}", "Maximize" if self.maximize else "Minimize"]
        terms = []
        if self.obj is not None:
            for col in np.flatnonzero(self.obj):
                terms.append(f"{self.obj[col]:+.17g} {_lp_name(self.var_names[col])}")
        out.append(" obj: " + (" ".join(terms) if terms else "0 " + _lp_name(self.var_names[0])))
        out.append("Subject To")
        op = {"<=": "<=", ">=": ">=", "==": "="}
        for ridx in range(self.n_rows):
            body = " ".join(
                f"{v:+.17g} {_lp_name(self.var_names[c])}"
                for c, v in zip(self.row_cols[ridx], self.row_vals[ridx])
            )
            if not body:
                body = f"0 {_lp_name(self.var_names[0])}"
            label = _lp_name(self.row_names[ridx] or f"r{ridx}")
            out.append(f" {label}: {body} {op[self.row_sense[ridx]]} {self.row_rhs[ridx]:.17g}")
        out.append("Bounds")
        for col, name in enumerate(self.var_names):
            lo, hi = self.lo[col], self.hi[col]
            lo_s = "-inf" if math.isinf(lo) else f"{lo:.17g}"
            hi_s = "+inf" if math.isinf(hi) else f"{hi:.17g}"
            out.append(f" {lo_s} <= {_lp_name(name)} <= {hi_s}")
        binaries = [
            self.var_names[c]
            for c in self.integer_cols()
            if self.lo[c] >= 0 and self.hi[c] <= 1
        ]
        generals = [self.var_names[c] for c in self.integer_cols() if self.var_names[c] not in binaries]
        if binaries:
            out.append("Binaries")
            out.append(" " + " ".join(_lp_name(n) for n in binaries))
        if generals:
            out.append("Generals")
            out.append(" " + " ".join(_lp_name(n) for n in generals))
        out.append("End")
        with open(path, "w") as fh:
            fh.write("\n".join(out) + "\n")


def _build_csr(rows, n_cols) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix((0, n_cols))
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, (cols, _) in enumerate(rows):
        indptr[i + 1] = indptr[i] + cols.size
    indices = np.concatenate([cols for cols, _ in rows]) if rows else np.empty(0, dtype=np.int64)
    data = np.concatenate([vals for _, vals in rows]) if rows else np.empty(0)
    mat = sp.csr_matrix((data, indices, indptr), shape=(len(rows), n_cols))
    mat.sum_duplicates()
    return mat


def _enc(v: float):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return v


def _dec(v) -> float:
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def _lp_name(name: str) -> str:
    return (
        name.replace("[", "_").replace("]", "").replace(",", "_").replace(" ", "")
        or "unnamed"
    )
