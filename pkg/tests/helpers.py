"""Brute-force oracles and hypothesis strategies shared by the test modules.

The oracles never call the curve operations under test; they only evaluate
input curves pointwise (checked separately against a direct evaluator).
"""

from __future__ import annotations

import math
from fractions import Fraction

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from rrbounds.curves import Curve
from rrbounds.curves import TokenBucketSpec
from rrbounds.scenario import ConstantRate, FlowSpec, Scenario

F = Fraction
INF = math.inf


# -- direct evaluation ----------------------------------------------------------

def direct_eval(desc, t):
    """Evaluate a curve description without the Curve class.

    ``desc`` is ``(v0, points, tail)``: ``points`` are ``(x, y, s)`` triples
    (value ``y + s (t - x)`` on ``(x, next x]``); ``tail`` is ``None`` for an
    affine tail or ``(end, period, increment)``.
    """
    v0, points, tail = desc
    if t == 0:
        return v0
    shift = 0
    if tail is not None:
        end, period, inc = tail
        while t > end:
            t -= period
            shift += inc
    piece = points[0]
    for p in points:
        if p[0] < t:
            piece = p
    x, y, s = piece
    return y + s * (t - x) + shift


def breakpoints(c: Curve, horizon):
    """All piece boundaries of ``c`` in ``[0, horizon]``, unrolling a periodic tail."""
    pts = {x for x in c.xs if x <= horizon}
    if c.periodic:
        start = c.end - c.period
        window = [x for x in c.xs if start < x < c.end] + [start, c.end]
        m = 1
        while start + m * c.period <= horizon:
            for x in window:
                if x + m * c.period <= horizon:
                    pts.add(x + m * c.period)
            m += 1
    pts.add(0)
    return sorted(pts)


def horizon_for(*curves):
    """Past every tail onset by two products of all periods."""
    h = 1
    periods = 1
    for c in curves:
        h = max(h, c.xs[-1] + 1, c.end or 0)
        if c.periodic:
            periods = periods * c.period
    return 2 * h + 2 * periods


class ConvOracle:
    """``inf_s f(s) + g(t - s)`` over every split point where a breakpoint can sit."""

    def __init__(self, f: Curve, g: Curve, horizon):
        self.f, self.g = f, g
        self.bf, self.bg = breakpoints(f, horizon), breakpoints(g, horizon)

    def __call__(self, t):
        f, g = self.f, self.g
        cands = {F(0), t}
        cands.update(s for s in self.bf if s <= t)
        cands.update(t - s for s in self.bg if s <= t)
        return min(f(s) + g(t - s) for s in cands)


def conv_oracle(f: Curve, g: Curve, t):
    return ConvOracle(f, g, t)(t)


def dominated_after_shift(alpha: Curve, beta: Curve, d, horizon, bps=None) -> bool:
    """``alpha(t) <= beta(t + d)`` for all ``t`` in ``[0, horizon]`` (values and right limits)."""
    ba, bb = bps or (breakpoints(alpha, horizon), breakpoints(beta, horizon + d))
    pts = {t for t in ba if t <= horizon}
    pts |= {x - d for x in bb if d <= x <= horizon + d}
    for t in pts:
        if alpha(t) > beta(t + d):
            return False
        if alpha.right_limit(t) > beta.right_limit(t + d):
            return False
    return True


def hdev_oracle(alpha: Curve, beta: Curve, iterations=45):
    """Horizontal deviation by bisection on the shift ``d``."""
    if alpha.rate > beta.rate:
        return INF
    horizon = horizon_for(alpha, beta)
    if dominated_after_shift(alpha, beta, 0, horizon):
        return 0
    if beta.rate == 0 and alpha.rate == 0:
        # both bounded: infinite exactly when beta never reaches alpha's supremum
        sup_a = alpha.right_limit(horizon)
        if beta(horizon) < sup_a:
            return INF
    hi = F(1)
    while not dominated_after_shift(alpha, beta, hi, horizon):
        hi *= 2
        if hi > 2 ** 12:
            return INF
    bps = (breakpoints(alpha, horizon), breakpoints(beta, horizon + hi))
    lo = F(0)
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if dominated_after_shift(alpha, beta, mid, horizon, bps):
            hi = mid
        else:
            lo = mid
    return hi


def probe_times(*curves, extra=(), limit=80):
    """Breakpoints of all curves, midpoints between them, and ``extra``, up to a common horizon.

    At most ``limit`` points are returned, spread evenly over the sorted list.
    """
    horizon = horizon_for(*curves)
    pts = set()
    for c in curves:
        pts |= set(breakpoints(c, horizon))
    pts |= set(extra)
    pts = sorted(p for p in pts if 0 <= p <= horizon)
    mids = [(a + b) / 2 for a, b in zip(pts, pts[1:])]
    out = sorted(set(pts) | set(mids) | {horizon})
    if len(out) > limit:
        step = len(out) / limit
        out = sorted({out[int(k * step)] for k in range(limit)} | {out[-1]})
    return out


def rel_close(a, b, tol=1e-9):
    if a == b:
        return True
    if a == INF or b == INF:
        return False
    return abs(a - b) <= tol * max(1, abs(a), abs(b))


# -- strategies -------------------------------------------------------------------

small = st.integers(min_value=0, max_value=4)
PERIODS = [F(1), F(2), F(3), F(1, 2), F(3, 2), F(4)]


@st.composite
def curve_descs(draw, allow_periodic=True, min_rate=0):
    """Random nondecreasing piecewise-affine curve descriptions with small rational data."""
    n = draw(st.integers(min_value=1, max_value=4))
    v0 = F(draw(st.integers(0, 1)))
    x, points = F(0), []
    y = v0 + draw(small)
    for k in range(n):
        s = F(draw(st.integers(0, 3)), draw(st.sampled_from([1, 2])))
        points.append((x, y, s))
        gap = F(draw(st.integers(1, 4)), draw(st.sampled_from([1, 2])))
        y = y + s * gap + draw(st.sampled_from([0, 0, 1, F(1, 2), 2]))
        x = x + gap
    periodic = allow_periodic and draw(st.booleans())
    if not periodic:
        last = points[-1]
        if last[2] < min_rate:
            points[-1] = (last[0], last[1], F(min_rate))
        return v0, points, None
    end = x
    period = draw(st.sampled_from([p for p in PERIODS if p <= end]))
    start = end - period
    desc = (v0, points, (end, period, F(0)))
    at_end = direct_eval((v0, points, None), end)
    # right limit at the window start
    just_after = max((p for p in points if p[0] <= start), key=lambda p: p[0])
    right_start = just_after[1] + just_after[2] * (start - just_after[0])
    inc = at_end - right_start + draw(st.sampled_from([0, 0, 1, F(1, 2)]))
    inc = max(inc, F(min_rate) * period)
    return v0, points, (end, period, inc)


def desc_to_curve(desc) -> Curve:
    v0, points, tail = desc
    xs, ys, ss = zip(*points)
    if tail is None:
        return Curve(v0, xs, ys, ss)
    return Curve(v0, xs, ys, ss, *tail)


curves = curve_descs().map(desc_to_curve)
zero_curves = curve_descs().filter(lambda d: d[0] == 0).map(desc_to_curve)


@st.composite
def scenarios(draw, min_flows=1, max_flows=5, max_weight=6, constrained=True, fixed_size=False):
    """Random scenarios with a constant-rate server and integer data in bits."""
    n = draw(st.integers(min_flows, max_flows))
    flows = []
    for _ in range(n):
        w = draw(st.integers(1, max_weight))
        lmax = draw(st.integers(100, 1500))
        lmin = lmax if fixed_size else draw(st.integers(50, lmax))
        arrival = None
        if constrained is True or (constrained is None and draw(st.booleans())):
            r = draw(st.integers(1_000, 100_000))
            b = draw(st.integers(lmax, 20 * lmax))
            arrival = TokenBucketSpec(r, b)
        flows.append(FlowSpec(w, lmin, lmax, arrival))
    total = sum(f.arrival.rate for f in flows if f.arrival is not None)
    u = F(draw(st.integers(10, 95)), 100)
    C = F(total) / u if total else F(draw(st.integers(10_000, 1_000_000)))
    foi = draw(st.integers(0, n - 1))
    return Scenario(flows, ConstantRate(C), foi)


@st.composite
def scenario_and_subset(draw, **kw):
    """A scenario and a subset M that contains the flow of interest."""
    s = draw(scenarios(**kw))
    M = {s.foi} | {k for k in s.cross if draw(st.booleans())}
    return s, M


def run_cases(check, strategy, n, seed_note=""):
    """Run ``check`` on ``n`` derandomized hypothesis examples (raises on the first failure)."""

    @settings(max_examples=n, derandomize=True, deadline=None, database=None,
              suppress_health_check=list(HealthCheck))
    @given(strategy)
    def prop(args):
        check(*args) if isinstance(args, tuple) else check(args)

    prop()


# -- checks shared by the curve tests and the acceptance run -------------------------

def check_conv(f: Curve, g: Curve):
    from rrbounds.curves import min_plus_conv

    h = min_plus_conv(f, g)
    times = probe_times(f, g, h)
    oracle = ConvOracle(f, g, times[-1])
    for t in times:
        assert h(t) == oracle(t), (t, h(t), oracle(t))


def check_max(f: Curve, g: Curve):
    from rrbounds.curves import pointwise_max

    m = pointwise_max(f, g)
    for t in probe_times(f, g, m):
        assert m(t) == max(f(t), g(t)), t
        assert m.right_limit(t) == max(f.right_limit(t), g.right_limit(t)), t


def check_compose(outer: Curve, inner: Curve):
    from rrbounds.curves import compose

    c = compose(outer, inner)
    for t in probe_times(inner, c):
        assert c(t) == outer(inner(t)), t


def check_hdev(alpha: Curve, beta: Curve):
    from rrbounds.curves import horizontal_deviation

    got, want = horizontal_deviation(alpha, beta), hdev_oracle(alpha, beta)
    assert rel_close(got, want, 1e-9), (got, float(want) if want != INF else want)
