"""Delay bounds from leftover curves, and the search over subsets ``M``.

Bounds are horizontal deviations between the arrival curve of the flow of
interest and a leftover service curve.  For the traffic-aware curves the
subset ``M`` is optimized either exhaustively or by the greedy burst-ordered
heuristic.  With a constant-rate server every term is a rate-latency curve and
the search runs on closed forms with incremental sums; other servers fall back
to full curve arithmetic.

Two conventions for the arrival curve of the flow of interest are offered.
``strict`` uses its token bucket ``(r, b)``; ``burst`` keeps only the burst
``b`` (rate 0), which is how the published numeric tables evaluate bounds.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict, Iterable, List, Optional, Sequence

from .curves import (Curve, constant, horizontal_deviation, pointwise_max,
                     rate_latency, token_bucket)
from .errors import InvalidParameter, SubsetLimitExceeded
from .leftover import (iwrr_bsp_params, iwrr_curve, iwrr_m_curve, normalize_subset,
                       wrr_bsp_params, wrr_linear_curve,
                       wrr_m_curve, wrr_stair_curve)
from .scenario import ConstantRate, FlowSpec, Scenario

AGNOSTIC = ("wrr_linear", "wrr_stair", "iwrr")
AWARE = ("wrr_m", "iwrr_m")
VARIANTS = AGNOSTIC + AWARE
CONVENTIONS = ("strict", "burst")
SEARCHES = ("auto", "exhaustive", "heuristic")
AUTO_EXHAUSTIVE_LIMIT = 16

_AGNOSTIC_CURVES = {"wrr_linear": wrr_linear_curve, "wrr_stair": wrr_stair_curve,
                    "iwrr": iwrr_curve}


@dataclass
class DelayBoundResult:
    scheduler: str
    foi: int
    bound: object
    curve: Curve
    subset: Optional[frozenset] = None
    subsets_evaluated: int = 0
    wall_time: float = 0.0
    method: str = "curve"
    convention: str = "strict"
    # exhaustive search only: bound against the max over all subsets
    max_curve_bound: object = None
    max_curve: Optional[Curve] = field(default=None, repr=False)

    @property
    def finite(self) -> bool:
        return self.bound != math.inf


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise InvalidParameter(f"unknown convention {convention!r}; use one of {CONVENTIONS}")


def foi_arrival(scenario: Scenario, convention: str = "strict") -> Optional[Curve]:
    """Arrival curve of the flow of interest, or None when it is unconstrained."""
    _check_convention(convention)
    a = scenario.flows[scenario.foi].arrival
    if a is None:
        return None
    return token_bucket(0 * a.rate if convention == "burst" else a.rate, a.burst)


def delay_bound(alpha: Optional[Curve], beta: Curve):
    """Horizontal deviation ``h(alpha, beta)``; infinite for an unconstrained flow."""
    if alpha is None:
        return math.inf
    return horizontal_deviation(alpha, beta)


def agnostic_bound(scenario: Scenario, variant: str, convention: str = "strict") -> DelayBoundResult:
    if variant not in AGNOSTIC:
        raise InvalidParameter(f"{variant!r} is not a traffic-agnostic variant")
    start = time.perf_counter()
    curve = _AGNOSTIC_CURVES[variant](scenario)
    bound = delay_bound(foi_arrival(scenario, convention), curve)
    return DelayBoundResult(variant, scenario.foi, bound, curve,
                            wall_time=time.perf_counter() - start, convention=convention)


# -- closed forms on rate-latency lines -------------------------------------------

def upper_envelope(lines):
    """Lines ``(R, T)`` (meaning ``R (t - T)``) that appear on ``max(0, ...)`` for t >= 0.

    Returned in increasing slope order; zero-rate lines are dropped.
    """
    by_slope = {}
    for R, T in lines:
        if R > 0 and T != math.inf and (R not in by_slope or T < by_slope[R]):
            by_slope[R] = T
    hull = []
    # each entry is (slope, intercept); the zero line anchors the left end
    for R in sorted(by_slope):
        b = -R * by_slope[R]
        while hull:
            R1, b1 = hull[-1]
            x1 = (-b1) / R1 if len(hull) == 1 else (hull[-2][1] - b1) / (R1 - hull[-2][0])
            # x where the new line overtakes the last one
            x_new = (b1 - b) / (R - R1)
            if x_new <= x1:
                hull.pop()
            else:
                break
        hull.append((R, b))
    return [(R, -b / R) for R, b in hull]


def h_token_bucket_lines(rate, burst, lines):
    """``h(gamma_{rate,burst}, max(0, max_k R_k (t - T_k)))`` in closed form."""
    if rate == 0 and burst == 0:
        return 0 * rate
    hull = upper_envelope(lines)
    if not hull or rate > hull[-1][0]:
        return math.inf

    def inverse(y):
        return min(T + y / R for R, T in hull)

    best = inverse(burst)
    if rate > 0:
        for (R1, T1), (R2, T2) in zip(hull, hull[1:]):
            # level at which consecutive envelope lines meet
            t = (R2 * T2 - R1 * T1) / (R2 - R1)
            y = R1 * (t - T1)
            if y > burst:
                s = (y - burst) / rate
                best = max(best, inverse(y) - s)
    return best


def envelope_curve(lines) -> Curve:
    hull = upper_envelope(lines)
    if not hull:
        return constant(0)
    return reduce(pointwise_max, [rate_latency(R, T) for R, T in hull])


class _SubsetEvaluator:
    """Evaluates one traffic-aware variant on subsets of a scenario."""

    def __init__(self, scenario: Scenario, variant: str, convention: str):
        if variant not in AWARE:
            raise InvalidParameter(f"{variant!r} is not a traffic-aware variant")
        _check_convention(convention)
        self.scenario, self.variant, self.convention = scenario, variant, convention
        self.params = (wrr_bsp_params(scenario),) if variant == "wrr_m" else iwrr_bsp_params(scenario)
        self.fast = isinstance(scenario.server, ConstantRate)
        self.alpha = foi_arrival(scenario, convention)
        fa = scenario.flows[scenario.foi].arrival
        self.a_rate = None if fa is None else (0 * fa.rate if convention == "burst" else fa.rate)
        self.a_burst = None if fa is None else fa.burst
        zero = 0 * scenario.flows[0].l_min
        self.r = [f.arrival.rate if f.constrained else zero for f in scenario.flows]
        self.b = [f.arrival.burst if f.constrained else zero for f in scenario.flows]
        self.zero = zero
        self.count = 0
        self.forced = normalize_subset(scenario, {scenario.foi})
        self.optional = [k for k in range(scenario.n) if k not in self.forced]

    # state: sums over M of phi and H per parameter set, sums of r and b outside M
    def state(self, M):
        return ([sum((p.phi[k] for k in M), self.zero) for p in self.params],
                [sum((p.H[k] for k in M), self.zero) for p in self.params],
                sum((self.r[k] for k in range(self.scenario.n) if k not in M), self.zero),
                sum((self.b[k] for k in range(self.scenario.n) if k not in M), self.zero))

    def with_flow(self, st, j):
        phis, hs, r_out, b_out = st
        return ([s + p.phi[j] for s, p in zip(phis, self.params)],
                [s + p.H[j] for s, p in zip(hs, self.params)],
                r_out - self.r[j], b_out - self.b[j])

    def lines(self, st):
        phis, hs, r_out, b_out = st
        rest = self.scenario.server.rate - r_out
        if rest <= 0:
            return []
        return [(p.phi[p.foi] / s * rest, (b_out + h) / rest)
                for p, s, h in zip(self.params, phis, hs)]

    def bound_from_state(self, st):
        self.count += 1
        if self.a_rate is None:
            return math.inf
        return h_token_bucket_lines(self.a_rate, self.a_burst, self.lines(st))

    def curve(self, M) -> Curve:
        if self.fast:
            lines = self.lines(self.state(M))
            return envelope_curve(lines) if lines else constant(self.zero)
        return (wrr_m_curve if self.variant == "wrr_m" else iwrr_m_curve)(self.scenario, M)

    def bound(self, M):
        M = frozenset(M)
        if self.fast:
            return self.bound_from_state(self.state(M))
        self.count += 1
        return delay_bound(self.alpha, self.curve(M))


def _key(bound, M):
    return (bound, len(M), tuple(sorted(M)))


def _groups(scenario: Scenario, flows, symmetry: bool):
    """Optional flows grouped by identical spec (singletons when ``symmetry`` is off)."""
    if not symmetry:
        return [[k] for k in flows]
    groups = {}
    for k in flows:
        groups.setdefault(scenario.flows[k], []).append(k)
    return list(groups.values())


def subset_count(scenario: Scenario, symmetry: bool = True) -> int:
    """Number of subsets the exhaustive search evaluates."""
    forced = normalize_subset(scenario, {scenario.foi})
    optional = [k for k in range(scenario.n) if k not in forced]
    return math.prod(len(g) + 1 for g in _groups(scenario, optional, symmetry))


def exhaustive_best(scenario: Scenario, variant: str = "wrr_m", n_limit: int = 20,
                    convention: str = "strict", symmetry: bool = True) -> DelayBoundResult:
    """Best subset over all choices of the optional cross-flows.

    ``bound`` is the per-subset minimum; ``max_curve_bound`` uses the pointwise
    maximum of all subset curves.  Ties go to the smallest subset, then the
    lexicographically smallest one.

    Flows with identical specs are interchangeable, so with ``symmetry`` only
    the number taken from each group matters (lowest indices first, which is
    also the lexicographic tie-break).  ``n_limit`` caps the work at
    ``2**n_limit`` evaluated subsets.
    """
    start = time.perf_counter()
    ev = _SubsetEvaluator(scenario, variant, convention)
    groups = _groups(scenario, ev.optional, symmetry)
    work = math.prod(len(g) + 1 for g in groups)
    if work > 2 ** n_limit:
        raise SubsetLimitExceeded(
            f"{work} subsets exceed the exhaustive limit 2**{n_limit}; "
            "use greedy_heuristic or raise n_limit")
    best = None
    all_lines = []
    curves = []
    if ev.fast:
        # depth-first over groups, adding flows one at a time with O(1) updates
        stack = [(0, ev.state(ev.forced), ev.forced)]
        while stack:
            pos, st, M = stack.pop()
            if pos == len(groups):
                bound = ev.bound_from_state(st)
                all_lines.extend(ev.lines(st))
                key = _key(bound, M)
                if best is None or key < best:
                    best = key
                continue
            stack.append((pos + 1, st, M))
            for j in groups[pos]:
                st, M = ev.with_flow(st, j), M | {j}
                stack.append((pos + 1, st, M))
        max_curve = envelope_curve(all_lines)
        max_bound = (math.inf if ev.a_rate is None
                     else h_token_bucket_lines(ev.a_rate, ev.a_burst, all_lines))
    else:
        for counts in itertools.product(*(range(len(g) + 1) for g in groups)):
            M = ev.forced.union(*(g[:c] for g, c in zip(groups, counts)))
            c = ev.curve(M)
            ev.count += 1
            curves.append(c)
            key = _key(delay_bound(ev.alpha, c), M)
            if best is None or key < best:
                best = key
        max_curve = reduce(pointwise_max, curves)
        max_bound = delay_bound(ev.alpha, max_curve)
    bound, _, subset = best
    subset = frozenset(subset)
    return DelayBoundResult(variant, scenario.foi, bound, ev.curve(subset), subset,
                            ev.count, time.perf_counter() - start, "exhaustive", convention,
                            max_bound, max_curve)


def greedy_heuristic(scenario: Scenario, variant: str = "wrr_m",
                     convention: str = "strict") -> DelayBoundResult:
    """Burst-ordered greedy growth of ``M``, accepting a flow only on strict improvement.

    The reported bound is always that of the returned subset; when no flow was
    accepted this is the starting subset, which the loop itself never scores.
    """
    start = time.perf_counter()
    ev = _SubsetEvaluator(scenario, variant, convention)
    M = ev.forced
    order = sorted(ev.optional, key=lambda k: (-ev.b[k], k))
    d_opt = math.inf
    if ev.fast:
        st = ev.state(M)
        for j in order:
            cand = ev.with_flow(st, j)
            d = ev.bound_from_state(cand)
            if d < d_opt:
                d_opt, st, M = d, cand, M | {j}
    else:
        for j in order:
            d = ev.bound(M | {j})
            if d < d_opt:
                d_opt, M = d, M | {j}
    if d_opt == math.inf:
        # nothing accepted (or nothing to try): M is the starting subset, never scored by the loop
        d_opt = ev.bound(M)
    return DelayBoundResult(variant, scenario.foi, d_opt, ev.curve(M), frozenset(M),
                            ev.count, time.perf_counter() - start, "heuristic", convention)


def aware_bound(scenario: Scenario, variant: str, convention: str = "strict",
                search: str = "auto", n_limit: int = 20) -> DelayBoundResult:
    if search not in SEARCHES:
        raise InvalidParameter(f"unknown search {search!r}; use one of {SEARCHES}")
    if search == "auto":
        limit = min(n_limit, AUTO_EXHAUSTIVE_LIMIT)
        search = "exhaustive" if subset_count(scenario) <= 2 ** limit else "heuristic"
    if search == "exhaustive":
        return exhaustive_best(scenario, variant, n_limit, convention)
    return greedy_heuristic(scenario, variant, convention)


def all_bounds(scenario: Scenario, variants: Sequence[str] = VARIANTS, convention: str = "strict",
               search: str = "auto", n_limit: int = 20) -> Dict[str, DelayBoundResult]:
    out = {}
    for v in variants:
        if v in AGNOSTIC:
            out[v] = agnostic_bound(scenario, v, convention)
        elif v in AWARE:
            out[v] = aware_bound(scenario, v, convention, search, n_limit)
        else:
            raise InvalidParameter(f"unknown variant {v!r}")
    return out


# -- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class ClassConfig:
    """A flow of interest plus one template flow per burst class (low, mid, high)."""

    foi: FlowSpec
    classes: tuple
    utilization: object

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ClassConfig":
        u = scenario.meta.get("utilization")
        if u is None:
            u = scenario.total_rate() / scenario.server.rate
        return cls(scenario.flows[scenario.foi],
                   tuple(scenario.flows[k] for k in scenario.cross), u)

    def scenario(self, counts: Iterable[int]) -> Scenario:
        counts = tuple(counts)
        if len(counts) != len(self.classes) or any(c < 0 for c in counts):
            raise InvalidParameter(f"need {len(self.classes)} nonnegative class counts, got {counts}")
        flows = [self.foi]
        for proto, c in zip(self.classes, counts):
            flows.extend([proto] * c)
        return Scenario(flows, ConstantRate(1), 0).at_utilization(self.utilization)


def with_psr(scenario: Scenario, psr) -> Scenario:
    """Set every ``l_min`` to ``max(l_max) / psr`` (capped at the flow's own ``l_max``)."""
    if not psr >= 1:
        raise InvalidParameter(f"packet size range must be >= 1, got {psr}")
    top = max(f.l_max for f in scenario.flows)
    flows = [FlowSpec(f.weight, min(f.l_max, top / psr), f.l_max, f.arrival) for f in scenario.flows]
    return scenario.with_flows(flows)


@dataclass
class SweepRow:
    point: object
    scenario: Scenario = field(repr=False)
    results: Dict[str, DelayBoundResult]


AXES = ("utilization", "psr", "flows-per-class", "burst-mix")


def sweep_scenario(template, axis: str, point) -> Scenario:
    if axis == "utilization":
        return template.at_utilization(point)
    if axis == "psr":
        return with_psr(template, point)
    cfg = template if isinstance(template, ClassConfig) else ClassConfig.from_scenario(template)
    if axis == "flows-per-class":
        if isinstance(point, bool) or not isinstance(point, int) or point < 0:
            raise InvalidParameter(f"flows per class must be a nonnegative integer, got {point!r}")
        return cfg.scenario((point,) * len(cfg.classes))
    if axis == "burst-mix":
        return cfg.scenario(point)
    raise InvalidParameter(f"unknown axis {axis!r}; use one of {AXES}")


def sweep(template, axis: str, points: Sequence, variants: Sequence[str] = VARIANTS,
          convention: str = "strict", search: str = "auto", n_limit: int = 20) -> List[SweepRow]:
    rows = []
    for p in points:
        s = sweep_scenario(template, axis, p)
        rows.append(SweepRow(p, s, all_bounds(s, variants, convention, search, n_limit)))
    return rows
