import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import scenarios
from rrbounds.curves import (TokenBucketSpec, affine, horizontal_deviation, rate_latency,
                             token_bucket)
from rrbounds.errors import InvalidParameter, SubsetLimitExceeded
from rrbounds.leftover import iwrr_m_curve, wrr_linear_curve, wrr_m_curve
from rrbounds.scenario import (ConstantRate, FlowSpec, GeneralService, Scenario,
                               bundled_scenario)
from rrbounds.search import (AGNOSTIC, AWARE, VARIANTS, ClassConfig, all_bounds, aware_bound,
                             delay_bound, envelope_curve, exhaustive_best, foi_arrival,
                             greedy_heuristic, h_token_bucket_lines, subset_count, sweep,
                             sweep_scenario, upper_envelope, with_psr)

FIG2 = bundled_scenario("fig2")
FIG3 = bundled_scenario("fig3")
CURVE_OF = {"wrr_m": wrr_m_curve, "iwrr_m": iwrr_m_curve}


def brute_force(s, variant, convention="strict"):
    """Per-subset minimum over every subset containing the flow of interest, via curves."""
    alpha = foi_arrival(s, convention)
    best = None
    for r in range(len(s.cross) + 1):
        for extra in itertools.combinations(s.cross, r):
            M = frozenset((s.foi,) + extra)
            d = delay_bound(alpha, CURVE_OF[variant](s, M))
            if best is None or d < best:
                best = d
    return best


# -- delay_bound -------------------------------------------------------------------

def test_delay_bound_examples():
    assert delay_bound(token_bucket(1, 2), rate_latency(2, 3)) == 4
    assert delay_bound(token_bucket(3, 2), rate_latency(2, 3)) == math.inf
    assert delay_bound(None, rate_latency(2, 3)) == math.inf
    d = delay_bound(foi_arrival(FIG2), wrr_m_curve(FIG2, {0}))
    assert d == F(19968 + 24576 + 27648 + 30208, 2_650_000)
    assert float(d) == pytest.approx(0.0386416, abs=1e-7)


def test_conventions():
    a = foi_arrival(FIG2, "burst")
    assert a.rate == 0 and a(1) == 30208
    with pytest.raises(InvalidParameter):
        foi_arrival(FIG2, "loose")


# -- exhaustive search ----------------------------------------------------------------

def test_exhaustive_single_flow():
    s = Scenario([FlowSpec(1, 8, 8, TokenBucketSpec(10, 80))], ConstantRate(100))
    r = exhaustive_best(s)
    assert r.subset == {0} and r.bound == F(80, 100)
    assert r.bound == delay_bound(foi_arrival(s), s.server.curve)


def test_exhaustive_forced_subset():
    fl = [FlowSpec(2, 8, 16, TokenBucketSpec(10, 80)), FlowSpec(1, 8, 8)]
    s = Scenario(fl, ConstantRate(100))
    r = exhaustive_best(s)
    assert r.subset == {0, 1} and r.subsets_evaluated == 1
    assert r.bound == delay_bound(foi_arrival(s), wrr_linear_curve(s))


def test_exhaustive_fig2():
    r = exhaustive_best(FIG2)
    assert r.bound <= F(19968 + 24576 + 27648 + 30208, 2_650_000)
    assert r.bound == brute_force(FIG2, "wrr_m")
    assert r.max_curve_bound <= r.bound
    assert r.subsets_evaluated == 8 and 0 in r.subset


def test_exhaustive_limit():
    s = Scenario([FlowSpec(k + 1, 8, 8, TokenBucketSpec(1, 8)) for k in range(8)],
                 ConstantRate(100))
    with pytest.raises(SubsetLimitExceeded):
        exhaustive_best(s, n_limit=6)
    assert exhaustive_best(s, n_limit=7).subsets_evaluated == 128


def test_symmetry_reduction_counts():
    s = FIG3.with_flows([FIG3.flows[0]] + [FIG3.flows[1]] * 4 + [FIG3.flows[3]] * 4)
    assert subset_count(s) == 25
    assert subset_count(s, symmetry=False) == 256


def test_tie_break_smallest_then_lexicographic():
    # identical cross-flows with zero burst and rate: every subset is a candidate tie
    fl = [FlowSpec(1, 8, 8, TokenBucketSpec(1, 8))] + [FlowSpec(1, 8, 8, TokenBucketSpec(0, 0))] * 3
    s = Scenario(fl, ConstantRate(100))
    r = exhaustive_best(s, symmetry=False)
    assert r.subset == {0}


@settings(max_examples=60, deadline=None)
@given(scenarios(max_flows=5), st.sampled_from(AWARE), st.sampled_from(["strict", "burst"]))
def test_exhaustive_matches_brute_force(s, variant, convention):
    full = exhaustive_best(s, variant, convention=convention, symmetry=False)
    sym = exhaustive_best(s, variant, convention=convention)
    want = brute_force(s, variant, convention)
    assert full.bound == sym.bound == want
    assert full.subset == sym.subset
    assert delay_bound(foi_arrival(s, convention), full.curve) == full.bound


@settings(max_examples=60, deadline=None)
@given(scenarios(max_flows=6), st.sampled_from(AWARE), st.data())
def test_max_curve_le_per_subset_le_witness(s, variant, data):
    r = exhaustive_best(s, variant)
    M = {s.foi} | set(data.draw(st.sets(st.sampled_from(s.cross))) if s.cross else set())
    witness = delay_bound(foi_arrival(s), CURVE_OF[variant](s, M))
    assert r.max_curve_bound <= r.bound <= witness


@settings(max_examples=60, deadline=None)
@given(scenarios(max_flows=7), st.sampled_from(AWARE), st.sampled_from(["strict", "burst"]))
def test_heuristic_never_beats_exhaustive(s, variant, convention):
    h = greedy_heuristic(s, variant, convention)
    e = exhaustive_best(s, variant, convention=convention)
    assert h.bound >= e.bound
    assert h.bound == delay_bound(foi_arrival(s, convention), h.curve)


@settings(max_examples=40, deadline=None)
@given(scenarios(max_flows=6))
def test_heuristic_deterministic(s):
    a, b = greedy_heuristic(s), greedy_heuristic(s)
    assert a.subset == b.subset and a.bound == b.bound


def test_heuristic_follows_burst_order():
    # visited by burst: 3, then 1, then 2; bursts of 1 and 2 are below the penalty of 8
    fl = [FlowSpec(1, 8, 8, TokenBucketSpec(10, 80)), FlowSpec(1, 8, 8, TokenBucketSpec(10, 5)),
          FlowSpec(1, 8, 8, TokenBucketSpec(10, 1)), FlowSpec(1, 8, 8, TokenBucketSpec(10, 9000))]
    s = Scenario(fl, ConstantRate(100))
    r = greedy_heuristic(s)
    assert r.subsets_evaluated == 3
    assert r.subset == {0, 3}
    assert r.bound == F(14, 80) + F(80, 40)


@settings(max_examples=40, deadline=None)
@given(scenarios(max_flows=5), st.integers(1, 100_000), st.integers(100, 1500), st.integers(1, 4),
       st.sampled_from(AWARE))
def test_adding_a_flow_never_helps(s, r, b, w, variant):
    extra = FlowSpec(w, b, b, TokenBucketSpec(r, b))
    bigger = s.with_flows(list(s.flows) + [extra])
    assert exhaustive_best(bigger, variant).bound >= exhaustive_best(s, variant).bound


@settings(max_examples=40, deadline=None)
@given(scenarios(max_flows=5), st.fractions(F(1, 10), 10, max_denominator=10))
def test_scaling_leaves_bounds_unchanged(s, lam):
    flows = [FlowSpec(f.weight, f.l_min * lam, f.l_max * lam,
                      TokenBucketSpec(f.arrival.rate * lam, f.arrival.burst * lam))
             for f in s.flows]
    t = Scenario(flows, ConstantRate(s.server.rate * lam), s.foi)
    a, b = all_bounds(s), all_bounds(t)
    for v in VARIANTS:
        assert a[v].bound == b[v].bound, v


@settings(max_examples=40, deadline=None)
@given(scenarios(max_flows=4), st.sampled_from(AWARE))
def test_closed_form_path_matches_curve_path(s, variant):
    g = s.with_server(GeneralService(affine(s.server.rate), convex=True))
    fast, slow = exhaustive_best(s, variant), exhaustive_best(g, variant)
    assert fast.bound == slow.bound
    assert fast.max_curve_bound == slow.max_curve_bound
    assert fast.subset == slow.subset
    assert greedy_heuristic(s, variant).bound == greedy_heuristic(g, variant).bound


lines_st = st.lists(st.tuples(st.fractions(F(1, 4), 20, max_denominator=5),
                              st.fractions(0, 10, max_denominator=5)), min_size=1, max_size=6)


@settings(max_examples=150, deadline=None)
@given(lines_st, st.fractions(0, 25, max_denominator=5), st.fractions(0, 30, max_denominator=5))
def test_envelope_deviation_matches_curves(lines, rate, burst):
    got = h_token_bucket_lines(rate, burst, lines)
    assert got == horizontal_deviation(token_bucket(rate, burst), envelope_curve(lines))


@settings(max_examples=150, deadline=None)
@given(lines_st)
def test_upper_envelope_keeps_the_maximum(lines):
    hull = upper_envelope(lines)
    assert [R for R, _ in hull] == sorted({R for R, _ in hull})
    for t in [F(k, 3) for k in range(0, 120)]:
        full = max([0] + [R * (t - T) for R, T in lines])
        kept = max([0] + [R * (t - T) for R, T in hull])
        assert full == kept


# -- all_bounds / sweeps ---------------------------------------------------------------

def test_all_bounds_ordering_fig2():
    b = all_bounds(FIG2)
    assert b["wrr_m"].bound < min(b[v].bound for v in AGNOSTIC)
    assert b["iwrr_m"].bound <= b["wrr_m"].bound
    assert b["iwrr"].bound <= b["wrr_stair"].bound <= b["wrr_linear"].bound
    with pytest.raises(InvalidParameter):
        all_bounds(FIG2, ("nope",))
    with pytest.raises(InvalidParameter):
        aware_bound(FIG2, "wrr_m", search="random")


def test_auto_switches_to_heuristic():
    big = ClassConfig.from_scenario(FIG3).scenario((30, 30, 30))
    assert aware_bound(big, "wrr_m", "burst").method == "exhaustive"   # 31^3 symmetric subsets
    distinct = big.with_flows([big.flows[0]] + [
        FlowSpec(f.weight, f.l_min, f.l_max, TokenBucketSpec(f.arrival.rate, f.arrival.burst + k))
        for k, f in enumerate(big.flows[1:])])
    assert aware_bound(distinct, "wrr_m", "burst").method == "heuristic"


def test_sweep_utilization_fig2():
    rows = sweep(FIG2, "utilization", [F(3, 10), F(6, 10), F(9, 10)])
    assert [r.point for r in rows] == [F(3, 10), F(6, 10), F(9, 10)]
    for r in rows:
        assert r.scenario.server.rate == 3 * 10 ** 6 / r.point
        assert r.results["wrr_m"].bound <= min(r.results[v].bound for v in AGNOSTIC)


def test_psr_axis():
    s = with_psr(FIG3, 1)
    assert all(f.l_min == f.l_max for f in s.flows)
    s = with_psr(FIG3, 4)
    assert all(f.l_min == 3000 for f in s.flows)
    assert max(f.l_max for f in s.flows) / min(f.l_min for f in s.flows) == 4
    row = sweep(FIG3, "psr", [1], convention="burst")[0]
    assert all(row.results[v].finite for v in VARIANTS)
    assert row.results["wrr_m"].bound < row.results["iwrr"].bound
    with pytest.raises(InvalidParameter):
        with_psr(FIG3, F(1, 2))


def test_class_axes():
    cfg = ClassConfig.from_scenario(FIG3)
    assert cfg.utilization == F(7, 10)
    s = sweep_scenario(FIG3, "flows-per-class", 2)
    assert s.n == 7 and s.total_rate() / s.server.rate == F(7, 10)
    s = sweep_scenario(cfg, "burst-mix", (7, 1, 1))
    assert [f.arrival.burst for f in s.flows[1:]].count(70_000) == 7
    for axis, point in [("flows-per-class", -1), ("burst-mix", (1, 1)), ("colour", 1)]:
        with pytest.raises(InvalidParameter):
            sweep_scenario(FIG3, axis, point)
