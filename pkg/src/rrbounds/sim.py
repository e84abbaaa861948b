"""Packet-level simulation of WRR and IWRR on a constant-rate link.

Packets arrive instantaneously and are transmitted non-preemptively at the
link rate.  Delay is completion time minus arrival time.  At equal instants,
arrivals are admitted before the next scheduling decision, and arrival ties are
broken by flow index.  When every queue is empty the link idles and the
round-robin position stays where it was.
"""

from __future__ import annotations

import math
import random
import warnings
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .curves import REL_TOL, as_number
from .errors import BoundViolation, InvalidParameter, UnsupportedServer
from .scenario import ConstantRate, FlowSpec, Scenario

POLICIES = ("min", "max", "alternating", "random")
SCHEDULERS = ("wrr", "iwrr")
DEFAULT_ROUNDS = 50


def _sizes(flow: FlowSpec, policy: str, rng: Optional[random.Random]):
    lo, hi = flow.l_min, flow.l_max
    n = 0
    while True:
        if policy == "min":
            yield lo
        elif policy == "max":
            yield hi
        elif policy == "alternating":
            yield hi if n % 2 == 0 else lo
        else:
            if isinstance(lo, float) or isinstance(hi, float):
                yield rng.uniform(lo, hi)
            else:
                yield lo + (hi - lo) * Fraction(rng.randint(0, 1000), 1000)
        n += 1


def greedy_source(flow: FlowSpec, policy: str = "max", horizon=1, seed: int = 0) -> List[Tuple]:
    """Packets ``(arrival, size)`` sent as early as the token bucket allows, up to ``horizon``."""
    if flow.arrival is None:
        raise InvalidParameter("greedy_source needs a flow with a token bucket")
    if policy not in POLICIES:
        raise InvalidParameter(f"unknown size policy {policy!r}; use one of {POLICIES}")
    rate, burst = flow.arrival.rate, flow.arrival.burst
    horizon = as_number(horizon)
    rng = random.Random(seed) if policy == "random" else None
    out, sent, t = [], 0 * rate, 0 * rate
    warned = False
    for size in _sizes(flow, policy, rng):
        if size > burst and not warned:
            warned = True
            warnings.warn("burst is smaller than a packet: it is held until the bucket holds "
                          "its size, and the trace only conforms to a larger burst", stacklevel=2)
        sent += size
        if sent > burst:
            if rate == 0:
                break
            t = max(t, (sent - burst) / rate)
        if t > horizon:
            break
        out.append((t, size))
    return out


@dataclass(frozen=True)
class PacketTrace:
    """Per-flow packet arrivals ``(time, size)``."""

    flows: Tuple

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(tuple(f) for f in self.flows))

    def conforms(self, scenario: Scenario) -> bool:
        try:
            self.check(scenario)
        except InvalidParameter:
            return False
        return True

    def check(self, scenario: Scenario) -> None:
        """Raise InvalidParameter on order, size or arrival-curve violations."""
        if len(self.flows) != scenario.n:
            raise InvalidParameter("trace and scenario disagree on the number of flows")
        for k, (spec, pkts) in enumerate(zip(scenario.flows, self.flows)):
            prev = None
            for t, size in pkts:
                if prev is not None and t < prev:
                    raise InvalidParameter(f"flow {k + 1}: arrival times decrease")
                if not (_le(spec.l_min, size) and _le(size, spec.l_max)):
                    raise InvalidParameter(f"flow {k + 1}: size {size} outside packet range")
                prev = t
            if spec.arrival is not None:
                _check_token_bucket(k, pkts, spec.arrival.rate, spec.arrival.burst)


def _le(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return a <= b + REL_TOL * max(1.0, abs(a), abs(b))
    return a <= b


def _check_token_bucket(k, pkts, rate, burst):
    # all pairs m <= n: S_n - S_{m-1} <= burst + rate (t_n - t_m), via a running minimum
    before = 0
    best = math.inf
    for t, size in pkts:
        best = min(best, before - rate * t)
        before += size
        if not _le(before - rate * t - burst, best):
            raise InvalidParameter(f"flow {k + 1}: trace violates its token bucket at t={t}")


@dataclass(frozen=True)
class PacketRecord:
    flow: int
    seq: int
    size: object
    arrival: object
    start: object
    completion: object

    @property
    def delay(self):
        return self.completion - self.arrival


@dataclass(frozen=True)
class Visit:
    """Packets served to ``flow`` in one round.

    ``backlogged`` means the flow was never found empty at its turn, so it
    must have received its full weight.
    """

    round: int
    flow: int
    served: int
    backlogged: bool


@dataclass
class SimResult:
    scheduler: str
    packets: List[List[PacketRecord]]
    horizon: object
    visits: List[Visit] = field(default_factory=list, repr=False)
    events: List[Tuple] = field(default_factory=list, repr=False)

    def delays(self, flow: int) -> list:
        return [p.delay for p in self.packets[flow]]

    def max_delay(self, flow: int):
        return max(self.delays(flow), default=0)

    @property
    def bits_served(self):
        return sum(p.size for pkts in self.packets for p in pkts)


def format_event(event) -> str:
    """Tab-separated ``time kind flow size queue-lengths`` (flows numbered from 1)."""
    t, kind, flow, size, queues = event
    return "\t".join([repr(float(t)), kind, "-" if flow is None else str(flow + 1),
                      "-" if size is None else repr(float(size)),
                      ",".join(str(q) for q in queues)])


def format_event_log(events) -> str:
    return "".join(format_event(e) + "\n" for e in events)


class _Wrr:
    def __init__(self, weights):
        self.w = weights
        self.flow, self.served, self.round = 0, 0, 0

    def pick(self, queues, visits):
        n = len(self.w)
        if not any(queues):
            return None
        while True:
            if queues[self.flow] and self.served < self.w[self.flow]:
                self.served += 1
                return self.flow
            if self.served:
                visits.append(Visit(self.round, self.flow, self.served, bool(queues[self.flow])))
            self.flow, self.served = self.flow + 1, 0
            if self.flow == n:
                self.flow, self.round = 0, self.round + 1


class _Iwrr:
    def __init__(self, weights):
        self.w = weights
        self.flow, self.cycle, self.round = 0, 1, 0
        self.wmax = max(weights)
        self.count = [0] * len(weights)
        self.missed = [False] * len(weights)

    def pick(self, queues, visits):
        n = len(self.w)
        if not any(queues):
            return None
        while True:
            if self.cycle > self.wmax:
                self._close_round(visits)
            i, cycle = self.flow, self.cycle
            self.flow += 1
            if self.flow == n:
                self.flow, self.cycle = 0, self.cycle + 1
            if cycle <= self.w[i]:
                if queues[i]:
                    self.count[i] += 1
                    return i
                self.missed[i] = True

    def _close_round(self, visits):
        for k, c in enumerate(self.count):
            if c:
                visits.append(Visit(self.round, k, c, not self.missed[k]))
        self.count = [0] * len(self.w)
        self.missed = [False] * len(self.w)
        self.cycle, self.round = 1, self.round + 1


def default_horizon(scenario: Scenario, rounds: int = DEFAULT_ROUNDS):
    """``rounds`` saturated rounds: ``rounds * sum(w_k l_max_k) / C``."""
    if not isinstance(scenario.server, ConstantRate):
        raise UnsupportedServer("the simulator needs a constant-rate server")
    return rounds * sum(f.weight * f.l_max for f in scenario.flows) / scenario.server.rate


def _run(scenario: Scenario, traces: PacketTrace, kind: str, horizon, log: bool) -> SimResult:
    if not isinstance(scenario.server, ConstantRate):
        raise UnsupportedServer("the simulator needs a constant-rate server")
    if not isinstance(traces, PacketTrace):
        traces = PacketTrace(traces)
    if len(traces.flows) != scenario.n:
        raise InvalidParameter("one packet list per flow is required")
    C = scenario.server.rate
    weights = [f.weight for f in scenario.flows]
    sched = _Wrr(weights) if kind == "wrr" else _Iwrr(weights)
    arrivals = sorted((t, k, seq, size) for k, pkts in enumerate(traces.flows)
                      for seq, (t, size) in enumerate(pkts))
    queues = [deque() for _ in scenario.flows]
    done = [[] for _ in scenario.flows]
    visits, events = [], []
    idx, now = 0, 0 * C
    # departure of the packet in service, logged once earlier arrivals are in
    pending = None

    def qlen():
        return tuple(len(q) for q in queues)

    while True:
        while idx < len(arrivals) and arrivals[idx][0] <= now:
            t, k, seq, size = arrivals[idx]
            if pending is not None and t == now:
                events.append((now, "depart", *pending, qlen()))
                pending = None
            queues[k].append((t, seq, size))
            idx += 1
            if log:
                events.append((t, "arrive", k, size, qlen()))
        if pending is not None:
            events.append((now, "depart", *pending, qlen()))
            pending = None
        k = sched.pick(queues, visits)
        if k is None:
            if idx == len(arrivals):
                break
            if log:
                events.append((now, "idle", None, None, qlen()))
            now = arrivals[idx][0]
            continue
        t, seq, size = queues[k].popleft()
        finish = now + size / C
        if log:
            events.append((now, "start", k, size, qlen()))
            pending = (k, size)
        done[k].append(PacketRecord(k, seq, size, t, now, finish))
        now = finish
    return SimResult(kind, done, horizon, visits, events)


def run_wrr(scenario: Scenario, traces, horizon=None, log: bool = True) -> SimResult:
    return _run(scenario, traces, "wrr", horizon, log)


def run_iwrr(scenario: Scenario, traces, horizon=None, log: bool = True) -> SimResult:
    return _run(scenario, traces, "iwrr", horizon, log)


def greedy_traces(scenario: Scenario, policy="max", horizon=None, seed: int = 0) -> PacketTrace:
    """Greedy conformant traces for every flow; unconstrained flows dump a backlog at t = 0.

    ``policy`` is one size policy or a sequence with one entry per flow.
    """
    horizon = default_horizon(scenario) if horizon is None else as_number(horizon)
    policies = [policy] * scenario.n if isinstance(policy, str) else list(policy)
    flows = []
    for k, (f, pol) in enumerate(zip(scenario.flows, policies)):
        if f.arrival is None:
            count = math.ceil(horizon * scenario.server.rate / f.l_min) + 1
            flows.append([(0 * horizon, f.l_max)] * count)
        else:
            flows.append(greedy_source(f, pol, horizon, seed * 1_000_003 + k))
    return PacketTrace(flows)


def simulate(scenario: Scenario, scheduler: str = "wrr", policy="max", seed: int = 0,
             horizon=None, log: bool = True) -> SimResult:
    if scheduler not in SCHEDULERS:
        raise InvalidParameter(f"unknown scheduler {scheduler!r}; use one of {SCHEDULERS}")
    horizon = default_horizon(scenario) if horizon is None else as_number(horizon)
    traces = greedy_traces(scenario, policy, horizon, seed)
    run = run_wrr if scheduler == "wrr" else run_iwrr
    return run(scenario, traces, horizon, log)


@dataclass(frozen=True)
class ValidationRow:
    scheduler: str
    flow: int
    bound: object
    observed: object
    note: str = ""

    @property
    def gap(self):
        return self.bound - self.observed


def validate_bounds(sim: SimResult, bounds: Sequence) -> List[ValidationRow]:
    """Check the observed max delay of each bound's flow against it.

    ``bounds`` holds DelayBoundResult objects (or a dict of them).  Infinite
    bounds are skipped with a note; a violation raises BoundViolation carrying
    the offending packet's events.
    """
    if isinstance(bounds, dict):
        bounds = list(bounds.values())
    rows = []
    for b in bounds:
        observed = sim.max_delay(b.foi)
        if b.bound == math.inf:
            rows.append(ValidationRow(b.scheduler, b.foi, b.bound, observed, "infinite bound, skipped"))
            continue
        if not _le(observed, b.bound):
            worst = max(sim.packets[b.foi], key=lambda p: p.delay)
            lines = [e for e in sim.events if worst.arrival <= e[0] <= worst.completion]
            raise BoundViolation(
                f"{b.scheduler}: flow {b.foi + 1} packet {worst.seq} waited {float(worst.delay)} s "
                f"> bound {float(b.bound)} s", [format_event(e) for e in lines])
        rows.append(ValidationRow(b.scheduler, b.foi, b.bound, observed))
    return rows
