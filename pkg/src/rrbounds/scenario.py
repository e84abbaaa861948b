"""Flows, servers and scenarios, plus the JSON scenario file format.

All quantities are stored in bits, seconds and bits per second.  Flow indices
are 0-based in Python; the scenario file uses a 1-based ``foi``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from numbers import Real
from typing import Optional, Sequence, Union

from .curves import Curve, TokenBucketSpec, as_number, rate_latency
from .errors import InvalidParameter

UNITS = {"bits": 1, "bytes": 8, "Kbit": 1000, "Mbit": 1_000_000}


@dataclass(frozen=True)
class FlowSpec:
    """One flow: integer WRR weight, packet-size range, optional token bucket."""

    weight: int
    l_min: Real
    l_max: Real
    arrival: Optional[TokenBucketSpec] = None

    def __post_init__(self):
        if isinstance(self.weight, bool) or not isinstance(self.weight, int):
            raise InvalidParameter(f"weights must be integers, got {self.weight!r}")
        if self.weight < 1:
            raise InvalidParameter(f"weights must be >= 1, got {self.weight}")
        object.__setattr__(self, "l_min", as_number(self.l_min))
        object.__setattr__(self, "l_max", as_number(self.l_max))
        if not 0 < self.l_min <= self.l_max:
            raise InvalidParameter(f"need 0 < l_min <= l_max, got {self.l_min}, {self.l_max}")

    @property
    def constrained(self) -> bool:
        return self.arrival is not None


@dataclass(frozen=True)
class ConstantRate:
    rate: Real

    def __post_init__(self):
        object.__setattr__(self, "rate", as_number(self.rate))
        if not self.rate > 0:
            raise InvalidParameter(f"server rate must be positive, got {self.rate}")

    convex = True

    @property
    def curve(self) -> Curve:
        return rate_latency(self.rate, 0 * self.rate)


@dataclass(frozen=True)
class GeneralService:
    """Aggregate strict service curve; ``convex`` must be declared for M-curves."""

    curve: Curve
    convex: bool = False

    def __post_init__(self):
        if self.curve(0) != 0:
            raise InvalidParameter("aggregate service curve must be 0 at t = 0")


AggregateService = Union[ConstantRate, GeneralService]


@dataclass(frozen=True)
class Scenario:
    flows: tuple
    server: AggregateService
    foi: int = 0
    # extra, format-preserving metadata (e.g. a declared utilization)
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        if not self.flows:
            raise InvalidParameter("a scenario needs at least one flow")
        if not 0 <= self.foi < len(self.flows):
            raise InvalidParameter(f"flow of interest {self.foi} out of range")

    @property
    def n(self) -> int:
        return len(self.flows)

    @property
    def cross(self) -> list:
        return [k for k in range(self.n) if k != self.foi]

    def with_foi(self, foi: int) -> "Scenario":
        return replace(self, foi=foi)

    def _meta_without_utilization(self) -> dict:
        # a declared utilization no longer matches once the server or the flows change
        return {k: v for k, v in self.meta.items() if k != "utilization"}

    def with_server(self, server: AggregateService) -> "Scenario":
        return replace(self, server=server, meta=self._meta_without_utilization())

    def with_flows(self, flows: Sequence[FlowSpec]) -> "Scenario":
        return replace(self, flows=tuple(flows), meta=self._meta_without_utilization())

    def total_rate(self):
        if not all(f.constrained for f in self.flows):
            raise InvalidParameter("utilization needs every flow to have an arrival curve")
        return sum((f.arrival.rate for f in self.flows), 0 * self.flows[0].l_min)

    def at_utilization(self, u) -> "Scenario":
        """Copy with a constant-rate server ``C = sum(r) / u``."""
        u = as_number(u)
        if not 0 < u < 1:
            raise InvalidParameter(f"utilization must lie in (0, 1), got {u}")
        return replace(self, server=ConstantRate(self.total_rate() / u),
                       meta={**self.meta, "utilization": u})


def check_scenario(scenario) -> Scenario:
    """Validate and return a Scenario (accepts a Scenario or a scenario dict)."""
    if isinstance(scenario, Scenario):
        return scenario
    if isinstance(scenario, dict):
        return scenario_from_dict(scenario)
    raise InvalidParameter(f"expected a Scenario, got {type(scenario).__name__}")


# -- file format -----------------------------------------------------------------

def _parse_number(x, exact=True):
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise InvalidParameter(f"not a number: {x!r}")
    if not exact:
        return float(Fraction(x)) if isinstance(x, str) else float(x)
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def _render_number(x):
    if isinstance(x, float):
        return x
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else str(x)


def scenario_from_dict(doc: dict, exact: bool = True) -> Scenario:
    """Build a Scenario from a parsed scenario document, converting units to bits."""
    schema_check(doc)
    units = doc.get("unit", {})
    length_unit = UNITS[units.get("length", "bits")]
    rate_unit = UNITS[units.get("rate", "bits")]
    burst_unit = UNITS[units.get("burst", units.get("length", "bits"))]

    def num(x, unit):
        return _parse_number(x, exact) * unit

    flows = []
    for f in doc["flows"]:
        arrival = None
        if "arrival" in f:
            a = f["arrival"]
            arrival = TokenBucketSpec(num(a["rate_bits_per_s"], rate_unit),
                                      num(a["burst_bits"], burst_unit))
        flows.append(FlowSpec(int(f["weight"]), num(f["l_min_bits"], length_unit),
                              num(f["l_max_bits"], length_unit), arrival))
    server_doc = doc["server"]
    foi = int(doc["foi"]) - 1
    if "rate_bits_per_s" in server_doc:
        return Scenario(flows, ConstantRate(num(server_doc["rate_bits_per_s"], rate_unit)), foi)
    u = _parse_number(server_doc["utilization"], exact)
    return Scenario(flows, ConstantRate(1), foi).at_utilization(u)


def scenario_to_dict(scenario: Scenario) -> dict:
    if not isinstance(scenario.server, ConstantRate):
        raise InvalidParameter("only constant-rate servers can be written to a scenario file")
    flows = []
    for f in scenario.flows:
        d = {"weight": f.weight, "l_min_bits": _render_number(f.l_min),
             "l_max_bits": _render_number(f.l_max)}
        if f.arrival is not None:
            d["arrival"] = {"rate_bits_per_s": _render_number(f.arrival.rate),
                            "burst_bits": _render_number(f.arrival.burst)}
        flows.append(d)
    if "utilization" in scenario.meta:
        server = {"utilization": _render_number(scenario.meta["utilization"])}
    else:
        server = {"rate_bits_per_s": _render_number(scenario.server.rate)}
    return {"server": server, "foi": scenario.foi + 1, "flows": flows}


def load_scenario(path, exact: bool = True) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh), exact=exact)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")


def _schema():
    return json.loads(resources.files("rrbounds").joinpath("data/scenario.schema.json").read_text())


def schema_check(doc: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        raise InvalidParameter(f"invalid scenario file: {exc.message}") from None


def bundled_scenario(name: str, exact: bool = True) -> Scenario:
    """Load one of the scenario files shipped in ``rrbounds/data`` (``fig2``, ``fig3``)."""
    path = resources.files("rrbounds").joinpath(f"data/{name}.json")
    if name.endswith("schema") or not path.is_file():
        raise InvalidParameter(f"no bundled scenario named {name!r}")
    text = path.read_text()
    return scenario_from_dict(json.loads(text), exact=exact)
