"""Per-unit grid model: buses, lines, generators, loads, shunts.

The model is immutable after construction (frozen dataclasses plus tuples),
so a Network can be shared freely between threads. All quantities are stored
in per unit on the system MVA base. Angles are in radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_ANGLE_BOUND = math.radians(30.0)


class NetworkError(ValueError):
    """Raised when a network violates a structural invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    vmin: float
    vmax: float


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    g: float                 # series conductance
    b: float                 # series susceptance
    g_fr: float = 0.0        # from-side charging conductance
    b_fr: float = 0.0        # from-side charging susceptance
    g_to: float = 0.0
    b_to: float = 0.0
    tap_re: float = 1.0      # complex tap ratio, real part
    tap_im: float = 0.0
    rate: float = 1.0        # thermal limit, per-unit MVA
    angle_min: float = -DEFAULT_ANGLE_BOUND
    angle_max: float = DEFAULT_ANGLE_BOUND
    risk: float = 1.0        # base risk weight; scenarios override

    @property
    def tap_sq(self) -> float:
        return self.tap_re * self.tap_re + self.tap_im * self.tap_im


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float


@dataclass(frozen=True)
class Load:
    id: int
    bus: int
    pd: float
    qd: float
    weight: float = 1.0


@dataclass(frozen=True)
class Shunt:
    id: int
    bus: int
    gs: float
    bs: float


@dataclass(frozen=True)
class RiskScenario:
    """Per-line risk values, reproducible from the stored seed.

    Values are drawn i.i.d. uniform on [0, 1] from numpy's default PCG64
    generator seeded with ``seed``, one draw per line in network line order.
    """

    seed: int
    risk: tuple[float, ...]

    def total(self) -> float:
        return float(sum(self.risk))


@dataclass(frozen=True)
class Network:
    name: str
    base_mva: float
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    shunts: tuple[Shunt, ...] = ()
    _bus_index: dict = field(default_factory=dict, repr=False, compare=False, init=False)

    def __post_init__(self):
        object.__setattr__(self, "_bus_index", {b.id: b for b in self.buses})
        self._validate()

    def _validate(self):
        errors = []
        if len(self._bus_index) != len(self.buses):
            errors.append("duplicate bus ids")
        for bus in self.buses:
            if not (0.0 < bus.vmin <= bus.vmax):
                errors.append(f"bus {bus.id}: voltage bounds must satisfy 0 < vmin <= vmax")
        for ln in self.lines:
            for end in (ln.from_bus, ln.to_bus):
                if end not in self._bus_index:
                    errors.append(f"line {ln.id}: references missing bus {end}")
            if ln.from_bus == ln.to_bus:
                errors.append(f"line {ln.id}: connects bus {ln.from_bus} to itself")
            if not ln.rate > 0:
                errors.append(f"line {ln.id}: thermal limit must be positive")
            if not (-math.pi / 2 < ln.angle_min <= ln.angle_max < math.pi / 2):
                errors.append(f"line {ln.id}: angle bounds must lie inside (-pi/2, pi/2)")
            if ln.tap_sq <= 0:
                errors.append(f"line {ln.id}: tap magnitude must be nonzero")
            if ln.risk < 0:
                errors.append(f"line {ln.id}: risk must be nonnegative")
        for gen in self.generators:
            if gen.bus not in self._bus_index:
                errors.append(f"generator {gen.id}: references missing bus {gen.bus}")
            if gen.pmin > gen.pmax or gen.qmin > gen.qmax:
                errors.append(f"generator {gen.id}: inverted limits")
        for load in self.loads:
            if load.bus not in self._bus_index:
                errors.append(f"load {load.id}: references missing bus {load.bus}")
            if load.weight <= 0:
                errors.append(f"load {load.id}: weight must be positive")
        for sh in self.shunts:
            if sh.bus not in self._bus_index:
                errors.append(f"shunt {sh.id}: references missing bus {sh.bus}")
            if not (math.isfinite(sh.gs) and math.isfinite(sh.bs)):
                errors.append(f"shunt {sh.id}: values must be finite")
        if errors:
            raise NetworkError("; ".join(errors))

    def bus(self, bus_id: int) -> Bus:
        return self._bus_index[bus_id]

    def gens_at(self, bus_id: int) -> list[Generator]:
        return [g for g in self.generators if g.bus == bus_id]

    def loads_at(self, bus_id: int) -> list[Load]:
        return [d for d in self.loads if d.bus == bus_id]

    def shunts_at(self, bus_id: int) -> list[Shunt]:
        return [s for s in self.shunts if s.bus == bus_id]

    def lines_at(self, bus_id: int) -> list[Line]:
        return [ln for ln in self.lines if bus_id in (ln.from_bus, ln.to_bus)]

    @property
    def total_weighted_demand(self) -> float:
        """Weighted real-power demand, the load-term normalizer."""
        return float(sum(d.weight * d.pd for d in self.loads))

    @property
    def total_risk(self) -> float:
        return float(sum(ln.risk for ln in self.lines))

    def line_risk(self, scenario: RiskScenario | None) -> np.ndarray:
        """Effective per-line risk vector under an optional scenario."""
        if scenario is None:
            return np.array([ln.risk for ln in self.lines], dtype=float)
        if len(scenario.risk) != len(self.lines):
            raise NetworkError(
                f"scenario has {len(scenario.risk)} risk values for {len(self.lines)} lines"
            )
        return np.array(scenario.risk, dtype=float)

    def to_json(self) -> str:
        """Canonical JSON dump; floats round-trip bit-exactly via repr."""
        payload = {
            "format": "gridshed-network",
            "version": 1,
            "name": self.name,
            "base_mva": self.base_mva,
            "buses": [vars_of(b) for b in self.buses],
            "lines": [vars_of(ln) for ln in self.lines],
            "generators": [vars_of(g) for g in self.generators],
            "loads": [vars_of(d) for d in self.loads],
            "shunts": [vars_of(s) for s in self.shunts],
        }
        return json.dumps(payload, indent=1)

    @staticmethod
    def from_json(text: str) -> "Network":
        data = json.loads(text)
        if data.get("format") != "gridshed-network":
            raise NetworkError("not a gridshed network dump")
        if data.get("version") != 1:
            raise NetworkError(f"unsupported network dump version {data.get('version')!r}")
        return Network(
            name=data["name"],
            base_mva=data["base_mva"],
            buses=tuple(Bus(**b) for b in data["buses"]),
            lines=tuple(Line(**ln) for ln in data["lines"]),
            generators=tuple(Generator(**g) for g in data["generators"]),
            loads=tuple(Load(**d) for d in data["loads"]),
            shunts=tuple(Shunt(**s) for s in data["shunts"]),
        )


def vars_of(component) -> dict:
    d = dict(vars(component))
    d.pop("_bus_index", None)
    return d


def sanitize_negative_loads(net: Network) -> tuple[Network, int]:
    """Zero out loads with negative real power.

    Loads with pd < 0 get both pd and qd set to 0 (reactive-only negative
    loads are left alone). Returns the sanitized network and the number of
    modified loads. Idempotent.
    """
    modified = 0
    new_loads = []
    for load in net.loads:
        if load.pd < 0:
            new_loads.append(replace(load, pd=0.0, qd=0.0))
            modified += 1
        else:
            new_loads.append(load)
    if modified == 0:
        return net, 0
    return replace(net, loads=tuple(new_loads)), modified


def generate_risk_scenario(net: Network, seed: int) -> RiskScenario:
    """Draw a wildfire-risk scenario: R ~ U[0,1] i.i.d. per line.

    Deterministic in (network line order, seed); the same seed always gives
    a bit-identical scenario.
    """
    rng = np.random.default_rng(seed)
    values = rng.random(len(net.lines))
    return RiskScenario(seed=seed, risk=tuple(float(v) for v in values))
