"""Parser for MATPOWER ``.m`` case files.

Reads the ``mpc.baseMVA``, ``mpc.bus``, ``mpc.gen``, ``mpc.branch`` and
(optional, nonstandard) ``mpc.shunt`` tables from the MATPOWER case text
format and converts everything to a per-unit :class:`~gridshed.network.Network`.

Conventions applied during conversion:

* out-of-service branches/generators (status 0) are dropped;
* branches without a transformer get tap ratio (1, 0);
* missing or unusable angle-difference bounds (0/0, or at/past +-90 deg)
  default to +-30 degrees;
* bus GS/BS columns become shunt components; an ``mpc.shunt`` table with
  rows ``[bus gs_mw bs_mvar]`` is also accepted and appended;
* every line starts with a base risk weight of 1.0.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

from .network import DEFAULT_ANGLE_BOUND, Bus, Generator, Line, Load, Network, NetworkError, Shunt

# MATPOWER column positions
BUS_I, BUS_TYPE, BUS_PD, BUS_QD, BUS_GS, BUS_BS = 0, 1, 2, 3, 4, 5
BUS_VMAX, BUS_VMIN = 11, 12
GEN_BUS, GEN_QMAX, GEN_QMIN, GEN_STATUS, GEN_PMAX, GEN_PMIN = 0, 3, 4, 7, 8, 9
BR_F, BR_T, BR_R, BR_X, BR_B, BR_RATE_A = 0, 1, 2, 3, 4, 5
BR_TAP, BR_SHIFT, BR_STATUS, BR_ANGMIN, BR_ANGMAX = 8, 9, 10, 11, 12


class CaseParseError(ValueError):
    """Malformed case file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _strip_comment(text: str) -> str:
    pos = text.find("%")
    return text if pos < 0 else text[:pos]


def _parse_scalar(name: str, lines: list[str]) -> float | None:
    pattern = re.compile(rf"mpc\.{name}\s*=\s*([^;]+);")
    for lineno, raw in enumerate(lines, start=1):
        m = pattern.search(_strip_comment(raw))
        if m:
            try:
                return float(m.group(1))
            except ValueError:
                raise CaseParseError(f"could not parse mpc.{name} value {m.group(1)!r}", lineno)
    return None


def _parse_matrix(name: str, lines: list[str]) -> list[tuple[int, list[float]]]:
    """Return [(source line number, row values), ...] for a bracketed table."""
    start_pat = re.compile(rf"mpc\.{name}\s*=\s*\[")
    rows: list[tuple[int, list[float]]] = []
    inside = False
    for lineno, raw in enumerate(lines, start=1):
        text = _strip_comment(raw)
        if not inside:
            m = start_pat.search(text)
            if not m:
                continue
            inside = True
            text = text[m.end():]
        closed = "]" in text
        if closed:
            text = text[: text.index("]")]
        # rows may be terminated by ';' within a line
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            values = []
            for tok in chunk.replace(",", " ").split():
                try:
                    values.append(float(tok))
                except ValueError:
                    raise CaseParseError(f"non-numeric token {tok!r} in mpc.{name}", lineno)
            rows.append((lineno, values))
        if closed:
            return rows
    if inside:
        raise CaseParseError(f"mpc.{name} table is never closed with ']'")
    return []


def _angle_bounds(angmin_deg: float, angmax_deg: float, lineno: int) -> tuple[float, float]:
    lo, hi = math.radians(angmin_deg), math.radians(angmax_deg)
    if angmin_deg == 0.0 and angmax_deg == 0.0:
        return -DEFAULT_ANGLE_BOUND, DEFAULT_ANGLE_BOUND
    if angmin_deg <= -90.0:
        lo = -DEFAULT_ANGLE_BOUND
    if angmax_deg >= 90.0:
        hi = DEFAULT_ANGLE_BOUND
    if not (-math.pi / 2 < lo <= hi < math.pi / 2):
        raise CaseParseError(f"unusable angle bounds ({angmin_deg}, {angmax_deg})", lineno)
    return lo, hi


def parse_case(path) -> Network:
    """Parse a MATPOWER case file into a per-unit Network."""
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()

    base_mva = _parse_scalar("baseMVA", lines)
    if base_mva is None:
        raise CaseParseError("mpc.baseMVA not found; empty or non-MATPOWER file")
    if base_mva <= 0:
        raise CaseParseError("mpc.baseMVA must be positive")

    bus_rows = _parse_matrix("bus", lines)
    gen_rows = _parse_matrix("gen", lines)
    branch_rows = _parse_matrix("branch", lines)
    shunt_rows = _parse_matrix("shunt", lines)
    if not bus_rows:
        raise CaseParseError("mpc.bus table missing or empty")

    buses, loads, shunts = [], [], []
    for lineno, row in bus_rows:
        if len(row) < 13:
            raise CaseParseError(f"bus row needs 13 columns, got {len(row)}", lineno)
        bus_id = int(row[BUS_I])
        buses.append(Bus(id=bus_id, vmin=row[BUS_VMIN], vmax=row[BUS_VMAX]))
        pd, qd = row[BUS_PD] / base_mva, row[BUS_QD] / base_mva
        if pd != 0.0 or qd != 0.0:
            loads.append(Load(id=len(loads) + 1, bus=bus_id, pd=pd, qd=qd, weight=1.0))
        gs, bs = row[BUS_GS] / base_mva, row[BUS_BS] / base_mva
        if gs != 0.0 or bs != 0.0:
            shunts.append(Shunt(id=len(shunts) + 1, bus=bus_id, gs=gs, bs=bs))

    for lineno, row in shunt_rows:
        if len(row) < 3:
            raise CaseParseError(f"shunt row needs 3 columns, got {len(row)}", lineno)
        shunts.append(
            Shunt(id=len(shunts) + 1, bus=int(row[0]), gs=row[1] / base_mva, bs=row[2] / base_mva)
        )

    gens = []
    for lineno, row in gen_rows:
        if len(row) < 10:
            raise CaseParseError(f"gen row needs at least 10 columns, got {len(row)}", lineno)
        if row[GEN_STATUS] <= 0:
            continue
        gens.append(
            Generator(
                id=len(gens) + 1,
                bus=int(row[GEN_BUS]),
                pmin=row[GEN_PMIN] / base_mva,
                pmax=row[GEN_PMAX] / base_mva,
                qmin=row[GEN_QMIN] / base_mva,
                qmax=row[GEN_QMAX] / base_mva,
            )
        )

    branches = []
    for lineno, row in branch_rows:
        if len(row) < 13:
            raise CaseParseError(f"branch row needs 13 columns, got {len(row)}", lineno)
        if row[BR_STATUS] <= 0:
            continue
        r, x = row[BR_R], row[BR_X]
        zsq = r * r + x * x
        if zsq == 0.0:
            raise CaseParseError("branch has zero series impedance", lineno)
        g, b = r / zsq, -x / zsq
        charge_b = row[BR_B] / 2.0
        tap = row[BR_TAP] if row[BR_TAP] != 0.0 else 1.0
        shift = math.radians(row[BR_SHIFT])
        angle_min, angle_max = _angle_bounds(row[BR_ANGMIN], row[BR_ANGMAX], lineno)
        branches.append(
            Line(
                id=len(branches) + 1,
                from_bus=int(row[BR_F]),
                to_bus=int(row[BR_T]),
                g=g,
                b=b,
                b_fr=charge_b,
                b_to=charge_b,
                tap_re=tap * math.cos(shift),
                tap_im=tap * math.sin(shift),
                rate=row[BR_RATE_A] / base_mva,
                angle_min=angle_min,
                angle_max=angle_max,
            )
        )

    try:
        return Network(
            name=path.stem,
            base_mva=base_mva,
            buses=tuple(buses),
            lines=tuple(branches),
            generators=tuple(gens),
            loads=tuple(loads),
            shunts=tuple(shunts),
        )
    except NetworkError as exc:
        raise NetworkError(f"{path.name}: {exc}") from exc


def bundled_case_path(name: str) -> Path:
    """Path of a case file shipped with the package (e.g. 'case3_risk')."""
    if not name.endswith(".m"):
        name += ".m"
    path = Path(__file__).parent / "cases" / name
    if not path.exists():
        available = sorted(p.name for p in path.parent.glob("*.m"))
        raise FileNotFoundError(f"no bundled case {name!r}; available: {available}")
    return path
