"""Grid case model: parsing, validation, loading scaling and wind injection.

The canonical model is a :class:`NetworkCase` built either from a subset of
the MATPOWER-style ``.m`` case format or from an equivalent JSON document.
Only the fields needed for DC cascade studies are kept; everything else in
the source tables (voltages, reactive power, shunts, transformer settings)
is parsed and discarded.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Bus",
    "Branch",
    "Generator",
    "NetworkCase",
    "ScenarioProfile",
    "CaseError",
    "CaseParseError",
    "CaseValidationError",
    "parse_case_file",
    "parse_case_json",
    "serialize_case",
    "scale_loading",
    "apply_wind",
    "load_priority_overrides",
    "load_bundled_case",
]


class CaseError(Exception):
    """Base class for case-file problems."""


class CaseParseError(CaseError):
    """Malformed case text; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CaseValidationError(CaseError):
    """Structurally valid text that violates a model invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    base_demand: float  # MW
    shed_priority: float = 1.0
    is_slack: bool = False


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    reactance: float  # per-unit
    rating_long_term: float  # MW
    cost_weight: float = 1.0  # rating / max rating over the case


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    cost_linear: float = 0.0  # $/MWh
    cost_quadratic: float = 0.0  # $/MW^2 h


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    base_mva: float = 100.0

    # -- convenience views -------------------------------------------------

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_branches(self):
        return len(self.branches)

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    def demand_vector(self) -> np.ndarray:
        return np.array([b.base_demand for b in self.buses], dtype=float)

    def priority_vector(self) -> np.ndarray:
        return np.array([b.shed_priority for b in self.buses], dtype=float)

    def rating_vector(self) -> np.ndarray:
        return np.array([br.rating_long_term for br in self.branches], dtype=float)

    def cost_weight_vector(self) -> np.ndarray:
        return np.array([br.cost_weight for br in self.branches], dtype=float)

    def total_demand(self) -> float:
        return float(sum(b.base_demand for b in self.buses))

    def validate(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise CaseValidationError("duplicate bus ids")
        known = set(ids)
        for b in self.buses:
            if b.base_demand < 0:
                raise CaseValidationError(f"bus {b.id}: negative demand")
            if b.shed_priority <= 0:
                raise CaseValidationError(f"bus {b.id}: shed priority must be > 0")
        for br in self.branches:
            if br.from_bus not in known or br.to_bus not in known:
                raise CaseValidationError(
                    f"branch {br.id}: endpoint references unknown bus "
                    f"({br.from_bus}, {br.to_bus})"
                )
            if br.reactance <= 0:
                raise CaseValidationError(f"branch {br.id}: reactance must be > 0")
            if br.rating_long_term <= 0:
                raise CaseValidationError(f"branch {br.id}: rating must be > 0")
        for g in self.generators:
            if g.bus not in known:
                raise CaseValidationError(f"generator at unknown bus {g.bus}")
            if not (0 <= g.p_min <= g.p_max):
                raise CaseValidationError(
                    f"generator at bus {g.bus}: need 0 <= p_min <= p_max"
                )
        if sum(1 for b in self.buses if b.is_slack) != 1:
            raise CaseValidationError("exactly one slack bus required")
        if self.branches and not self._connected():
            raise CaseValidationError("graph not connected with all branches alive")
        if sum(g.p_max for g in self.generators) < self.total_demand() - 1e-9:
            raise CaseValidationError("total generation capacity below base demand")
        return self

    def _connected(self):
        index = self.bus_index()
        adj: list[list[int]] = [[] for _ in self.buses]
        for br in self.branches:
            u, v = index[br.from_bus], index[br.to_bus]
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n_buses


@dataclass(frozen=True)
class ScenarioProfile:
    """Initial network profile: loading, wind and contingency settings.

    ``wind_fraction`` and ``wind_reduction`` are both expressed as fractions
    of the base (unscaled) system load, so the aggregate net-load multiplier
    is ``loading_multiplier - wind_fraction`` before the reduction and
    ``loading_multiplier - wind_fraction + wind_reduction`` after it.
    """

    loading_multiplier: float = 1.0
    wind_fraction: float = 0.0
    wind_buses: frozenset[int] = frozenset()  # empty = all load buses
    initial_contingencies: frozenset[int] = frozenset()
    wind_reduction: float = 0.0

    def validate(self, case: NetworkCase | None = None):
        if not 0.9 <= self.loading_multiplier <= 1.8:
            raise ValueError("loading multiplier must lie in [0.9, 1.8]")
        if not 0 <= self.wind_fraction < 1:
            raise ValueError("wind fraction must lie in [0, 1)")
        if not 0 <= self.wind_reduction <= 0.7:
            raise ValueError("wind reduction must lie in [0, 0.7]")
        net = self.loading_multiplier - self.wind_fraction + self.wind_reduction
        if net > 1.8 + 1e-12:
            raise ValueError(f"net load multiplier {net:.3f} exceeds 1.8")
        if self.wind_reduction > self.wind_fraction:
            raise ValueError("cannot reduce more wind than is injected")
        if case is not None:
            branch_ids = {br.id for br in case.branches}
            unknown = set(self.initial_contingencies) - branch_ids
            if unknown:
                raise ValueError(f"unknown contingency branches {sorted(unknown)}")
            bus_ids = {b.id for b in case.buses}
            if set(self.wind_buses) - bus_ids:
                raise ValueError("wind bus not in case")
        return self


# ---------------------------------------------------------------------------
# parsing


_TABLE_RE = re.compile(r"mpc\.(?P<name>\w+)\s*=\s*\[")


def _strip_comment(line):
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _extract_tables(text):
    """Pull every ``mpc.<name> = [ ... ];`` numeric table out of the text."""
    tables: dict[str, list[list[float]]] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = _strip_comment(lines[i])
        m = _TABLE_RE.search(raw)
        if not m:
            i += 1
            continue
        name = m.group("name")
        rows: list[list[float]] = []
        body = raw[m.end():]
        lineno = i + 1
        closed = False
        while True:
            if "]" in body:
                body = body[: body.index("]")]
                closed = True
            body = body.strip()
            if body:
                for chunk in body.split(";"):
                    chunk = chunk.strip()
                    if not chunk:
                        continue
                    try:
                        rows.append([float(tok) for tok in chunk.split()])
                    except ValueError:
                        raise CaseParseError(
                            f"non-numeric entry in mpc.{name}", line=lineno
                        )
            if closed:
                break
            i += 1
            if i >= len(lines):
                raise CaseParseError(f"unterminated table mpc.{name}", line=lineno)
            lineno = i + 1
            body = _strip_comment(lines[i])
        tables[name] = rows
        i += 1
    return tables


def _scalar_assign(text, name):
    m = re.search(rf"mpc\.{name}\s*=\s*([0-9.eE+-]+)\s*;", text)
    return float(m.group(1)) if m else None


def _with_cost_weights(branches: Iterable[Branch]) -> tuple[Branch, ...]:
    branches = list(branches)
    if not branches:
        return ()
    top = max(br.rating_long_term for br in branches)
    return tuple(
        replace(br, cost_weight=br.rating_long_term / top) for br in branches
    )


def parse_case_file(text: str) -> NetworkCase:
    """Parse a MATPOWER-style ``.m`` case into a validated :class:`NetworkCase`."""
    if text.lstrip().startswith("{"):
        return parse_case_json(text)
    tables = _extract_tables(text)
    for required in ("bus", "branch", "gen"):
        if required not in tables:
            raise CaseParseError(f"missing mpc.{required} table")
    base_mva = _scalar_assign(text, "baseMVA") or 100.0

    buses = []
    for row in tables["bus"]:
        if len(row) < 3:
            raise CaseParseError("bus row needs at least (id, type, Pd)")
        buses.append(
            Bus(id=int(row[0]), base_demand=float(row[2]), is_slack=int(row[1]) == 3)
        )

    branches = []
    for k, row in enumerate(tables["branch"]):
        if len(row) < 6:
            raise CaseParseError("branch row needs at least (f, t, r, x, b, rateA)")
        if len(row) >= 11 and int(row[10]) == 0:
            continue  # out-of-service branch
        branches.append(
            Branch(
                id=k + 1,
                from_bus=int(row[0]),
                to_bus=int(row[1]),
                reactance=float(row[3]),
                rating_long_term=float(row[5]),
            )
        )

    costs = tables.get("gencost", [])
    gens = []
    for k, row in enumerate(tables["gen"]):
        if len(row) < 10:
            raise CaseParseError("gen row needs at least 10 columns")
        if int(row[7]) == 0:
            continue  # offline unit
        lin = quad = 0.0
        if k < len(costs):
            crow = costs[k]
            model, n = int(crow[0]), int(crow[3])
            if model == 2:
                coeffs = crow[4 : 4 + n]  # highest order first
                for power, c in enumerate(reversed(coeffs)):
                    if power == 1:
                        lin = float(c)
                    elif power == 2:
                        quad = float(c)
        gens.append(
            Generator(
                bus=int(row[0]),
                p_min=float(row[9]),
                p_max=float(row[8]),
                cost_linear=lin,
                cost_quadratic=quad,
            )
        )

    case = NetworkCase(
        buses=tuple(buses),
        branches=_with_cost_weights(branches),
        generators=tuple(gens),
        base_mva=base_mva,
    )
    return case.validate()


def parse_case_json(text: str) -> NetworkCase:
    """Parse the canonical JSON case format (same content as the ``.m`` subset)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(str(exc), line=exc.lineno)
    try:
        buses = tuple(
            Bus(
                id=int(b["id"]),
                base_demand=float(b["base_demand"]),
                shed_priority=float(b.get("shed_priority", 1.0)),
                is_slack=bool(b.get("is_slack", False)),
            )
            for b in doc["buses"]
        )
        branches = tuple(
            Branch(
                id=int(br["id"]),
                from_bus=int(br["from_bus"]),
                to_bus=int(br["to_bus"]),
                reactance=float(br["reactance"]),
                rating_long_term=float(br["rating_long_term"]),
                cost_weight=float(br.get("cost_weight", 1.0)),
            )
            for br in doc["branches"]
        )
        gens = tuple(
            Generator(
                bus=int(g["bus"]),
                p_min=float(g["p_min"]),
                p_max=float(g["p_max"]),
                cost_linear=float(g.get("cost_linear", 0.0)),
                cost_quadratic=float(g.get("cost_quadratic", 0.0)),
            )
            for g in doc["generators"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseParseError(f"bad JSON case structure: {exc}")
    if not any("cost_weight" in br for br in doc["branches"]):
        branches = _with_cost_weights(branches)
    case = NetworkCase(
        buses=buses,
        branches=branches,
        generators=gens,
        base_mva=float(doc.get("base_mva", 100.0)),
    )
    return case.validate()


def serialize_case(case: NetworkCase) -> str:
    """Canonical JSON serialization; ``parse_case_json`` round-trips it."""
    doc = {
        "base_mva": case.base_mva,
        "buses": [
            {
                "id": b.id,
                "base_demand": b.base_demand,
                "shed_priority": b.shed_priority,
                "is_slack": b.is_slack,
            }
            for b in case.buses
        ],
        "branches": [
            {
                "id": br.id,
                "from_bus": br.from_bus,
                "to_bus": br.to_bus,
                "reactance": br.reactance,
                "rating_long_term": br.rating_long_term,
                "cost_weight": br.cost_weight,
            }
            for br in case.branches
        ],
        "generators": [
            {
                "bus": g.bus,
                "p_min": g.p_min,
                "p_max": g.p_max,
                "cost_linear": g.cost_linear,
                "cost_quadratic": g.cost_quadratic,
            }
            for g in case.generators
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def load_bundled_case(name: str = "ieee30") -> NetworkCase:
    """Load a case shipped with the package (currently ``ieee30``)."""
    text = resources.files("gridcascade.data").joinpath(f"{name}.m").read_text()
    return parse_case_file(text)


# ---------------------------------------------------------------------------
# transformations


def scale_loading(case: NetworkCase, c: float) -> NetworkCase:
    """Multiply every bus demand by ``c``; ratings and generators unchanged."""
    if c <= 0:
        raise ValueError("loading multiplier must be positive")
    buses = tuple(replace(b, base_demand=b.base_demand * c) for b in case.buses)
    return replace(case, buses=buses)


def load_priority_overrides(case: NetworkCase, csv_text: str) -> NetworkCase:
    """Apply a ``bus_id,priority`` CSV to the case's shed priorities."""
    overrides: dict[int, float] = {}
    for lineno, line in enumerate(csv_text.splitlines(), start=1):
        line = line.strip()
        if not line or line.lower().startswith("bus_id"):
            continue
        try:
            bus_id, prio = line.split(",")
            overrides[int(bus_id)] = float(prio)
        except ValueError:
            raise CaseParseError("expected `bus_id,priority`", line=lineno)
    known = {b.id for b in case.buses}
    missing = set(overrides) - known
    if missing:
        raise CaseValidationError(f"priority override for unknown buses {sorted(missing)}")
    buses = tuple(
        replace(b, shed_priority=overrides.get(b.id, b.shed_priority))
        for b in case.buses
    )
    return replace(case, buses=buses)


def wind_bus_ids(case: NetworkCase, profile: ScenarioProfile) -> list[int]:
    if profile.wind_buses:
        return sorted(profile.wind_buses)
    return [b.id for b in case.buses if b.base_demand > 0]


def apply_wind(
    case: NetworkCase, profile: ScenarioProfile, reduced: bool = False
) -> tuple[NetworkCase, list[tuple[int, float]]]:
    """Scale the case per the profile and net out wind as negative load.

    Returns the transformed case plus a list of ``(bus_id, spilled_mw)``
    records for buses whose net demand was clamped at zero.
    """
    profile.validate(case)
    base_load = case.total_demand()
    scaled = scale_loading(case, profile.loading_multiplier)
    wind_mw = profile.wind_fraction * base_load
    if reduced:
        wind_mw -= profile.wind_reduction * base_load
    if wind_mw <= 0:
        return scaled, []

    targets = set(wind_bus_ids(case, profile))
    share_base = sum(b.base_demand for b in scaled.buses if b.id in targets)
    if share_base <= 0:
        raise ValueError("wind buses carry no demand to net against")

    spills: list[tuple[int, float]] = []
    buses = []
    for b in scaled.buses:
        if b.id in targets:
            injection = wind_mw * b.base_demand / share_base
            net = b.base_demand - injection
            if net < 0:
                spills.append((b.id, -net))
                net = 0.0
            buses.append(replace(b, base_demand=net))
        else:
            buses.append(b)
    return replace(scaled, buses=tuple(buses)), spills
