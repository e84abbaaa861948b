"""Command-line entry point: experiment tables as CSV, and simulation checks.

Every verb reads a scenario file (``--scenario``; the names ``fig2`` and
``fig3`` refer to the bundled files) and writes CSV to ``--out`` or stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import warnings
from fractions import Fraction
from typing import List, Sequence

from .errors import BoundViolation, InvalidParameter, RRBoundsError, UnsupportedServer
from .leftover import iwrr_curve, wrr_linear_curve, wrr_stair_curve
from .scenario import Scenario, bundled_scenario, load_scenario
from .search import (AGNOSTIC, VARIANTS, ClassConfig, all_bounds, aware_bound, sweep,
                     sweep_scenario)
from .sim import POLICIES, format_event_log, simulate, validate_bounds

DEFAULT_MIXES = "7,1,1;5,3,1;3,5,1;1,7,1;1,5,3;1,3,5;1,1,7"
DEFAULT_PSR = "1,1.5,2,2.5,3,3.5,4,5,6"
DEFAULT_K = "1,2,4,8"
DEFAULT_TOTALS = "13,49,100,499,1000"
SIM_VARIANTS = {"wrr": ("wrr_linear", "wrr_stair", "wrr_m"), "iwrr": VARIANTS}


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool) or isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _number(text: str, exact: bool):
    return Fraction(text) if exact else float(text)


def _numbers(text: str, exact: bool) -> List:
    return [_number(p.strip(), exact) for p in text.split(",") if p.strip()]


def _ints(text: str) -> List[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise InvalidParameter(f"expected comma-separated integers, got {text!r}") from None


def _best_sota(results):
    return min(results[v].bound for v in AGNOSTIC)


def cmd_curves(scenario: Scenario, t_max, samples: int, convention="burst"):
    if samples < 2:
        raise InvalidParameter("need at least two samples")
    curves = {"wrr_linear": wrr_linear_curve(scenario), "wrr_stair": wrr_stair_curve(scenario),
              "iwrr": iwrr_curve(scenario)}
    try:
        for v in ("wrr_m", "iwrr_m"):
            r = aware_bound(scenario, v, convention)
            curves[v + "_best"] = r.max_curve if r.max_curve is not None else r.curve
    except UnsupportedServer as exc:
        warnings.warn(f"traffic-aware columns omitted: {exc}")
    header = ["t"] + list(curves)
    rows = []
    for k in range(samples):
        t = t_max * k / (samples - 1)
        rows.append([t] + [c(t) for c in curves.values()])
    return header, rows


def _bound_cols(results):
    return [results[v].bound for v in VARIANTS]


def cmd_delay_sweep(scenario: Scenario, u_from, u_to, steps: int, convention="burst"):
    if steps < 1:
        raise InvalidParameter("steps must be positive")
    if not 0 < u_from <= u_to < 1:
        raise InvalidParameter("utilizations must satisfy 0 < from <= to < 1")
    points = [u_from + (u_to - u_from) * k / max(steps - 1, 1) for k in range(steps)]
    rows = []
    for row in sweep(scenario, "utilization", points, convention=convention):
        subset = sorted(k + 1 for k in row.results["wrr_m"].subset)
        rows.append([row.point, row.scenario.server.rate] + _bound_cols(row.results)
                    + [" ".join(map(str, subset))])
    return ["utilization", "capacity_bits_per_s"] + list(VARIANTS) + ["wrr_m_subset"], rows


def cmd_burst_classes(scenario: Scenario, mixes, convention="burst"):
    rows = []
    for row in sweep(ClassConfig.from_scenario(scenario), "burst-mix", mixes, convention=convention):
        sota = _best_sota(row.results)
        rows.append(list(row.point) + _bound_cols(row.results)
                    + [row.results["wrr_m"].bound / sota if sota != math.inf else 0])
    return ["n_low", "n_mid", "n_high"] + list(VARIANTS) + ["wrr_m_over_best_sota"], rows


def cmd_psr_sweep(scenario: Scenario, psrs, counts=(3, 3, 3), convention="burst"):
    base = ClassConfig.from_scenario(scenario).scenario(counts)
    rows = []
    for row in sweep(base, "psr", psrs, convention=convention):
        lmin = min(f.l_min for f in row.scenario.flows)
        rows.append([row.point, lmin] + _bound_cols(row.results))
    return ["psr", "l_min_bits"] + list(VARIANTS), rows


def cmd_flow_count(scenario: Scenario, ks, convention="burst"):
    rows = []
    for row in sweep(ClassConfig.from_scenario(scenario), "flows-per-class", ks,
                     convention=convention, n_limit=64):
        sota = _best_sota(row.results)
        gain = 1 - row.results["wrr_m"].bound / sota if sota != math.inf else 1
        rows.append([row.point, row.scenario.n] + _bound_cols(row.results)
                    + [row.results["wrr_m"].method, gain])
    return ["k", "total_flows"] + list(VARIANTS) + ["wrr_m_search", "improvement"], rows


def cmd_heuristic_table(scenario: Scenario, totals, convention="burst"):
    cfg = ClassConfig.from_scenario(scenario)
    classes = len(cfg.classes)
    rows = []
    for total in totals:
        if (total - 1) % classes:
            raise InvalidParameter(f"{total} flows cannot be split into 1 + {classes} equal classes")
        k = (total - 1) // classes
        s = sweep_scenario(cfg, "flows-per-class", k)
        res = all_bounds(s, ("wrr_m", "iwrr"), convention, search="heuristic")
        h = res["wrr_m"]
        rows.append([total, k, h.bound, res["iwrr"].bound, len(h.subset), h.wall_time])
    return ["total_flows", "flows_per_class", "heuristic_wrr_m", "iwrr", "subset_size",
            "wall_time_s"], rows


def cmd_simulate(scenario: Scenario, scheduler: str, seed: int, horizon=None, policy="random"):
    """Simulate, and check every flow's max delay against the bounds valid for the scheduler.

    Returns ``(header, rows, sims)``; raises BoundViolation on a violation.
    """
    schedulers = ("wrr", "iwrr") if scheduler == "both" else (scheduler,)
    rows, sims = [], {}
    bounds = {}
    for i in range(scenario.n):
        bounds[i] = all_bounds(scenario.with_foi(i), VARIANTS, "strict")
    for sch in schedulers:
        sim = simulate(scenario, sch, policy, seed, horizon)
        sims[sch] = sim
        for i in range(scenario.n):
            chosen = [bounds[i][v] for v in SIM_VARIANTS[sch]]
            for check in validate_bounds(sim, chosen):
                rows.append([sch, i + 1, len(sim.packets[i]), check.observed, check.scheduler,
                             check.bound, check.gap if check.bound != math.inf else "inf"])
    return (["scheduler", "flow", "packets", "max_delay", "variant", "bound", "gap"], rows, sims)


def _load(name: str, exact: bool) -> Scenario:
    if not os.path.exists(name) and name in ("fig2", "fig3"):
        return bundled_scenario(name, exact)
    return load_scenario(name, exact)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario file, or fig2 / fig3 for the bundled ones")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for random packet sizes")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="exact", action="store_true", default=True,
                      help="rational arithmetic (default)")
    mode.add_argument("--float", dest="exact", action="store_false", help="floating point")
    common.add_argument("--convention", choices=("burst", "strict"), default="burst",
                        help="arrival curve of the flow of interest in bounds (default: burst)")

    p = argparse.ArgumentParser(prog="rrbounds", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    c = sub.add_parser("curves", parents=[common], help="sampled leftover service curves")
    c.add_argument("--t-max", default="0.2")
    c.add_argument("--samples", type=int, default=201)
    d = sub.add_parser("delay-sweep", parents=[common], help="delay bounds over utilization")
    d.add_argument("--from", dest="u_from", default="0.1")
    d.add_argument("--to", dest="u_to", default="0.95")
    d.add_argument("--steps", type=int, default=18)
    b = sub.add_parser("burst-classes", parents=[common], help="bounds per burst-class mix")
    b.add_argument("--mixes", default=DEFAULT_MIXES, help="semicolon-separated n_low,n_mid,n_high")
    s = sub.add_parser("psr-sweep", parents=[common], help="bounds over packet size range")
    s.add_argument("--psr", default=DEFAULT_PSR)
    s.add_argument("--counts", default="3,3,3", help="flows per burst class")
    f = sub.add_parser("flow-count", parents=[common], help="bounds over flows per class")
    f.add_argument("--k", default=DEFAULT_K)
    h = sub.add_parser("heuristic-table", parents=[common], help="heuristic vs IWRR for many flows")
    h.add_argument("--totals", default=DEFAULT_TOTALS)
    m = sub.add_parser("simulate", parents=[common], help="simulate and validate the bounds")
    m.add_argument("--scheduler", choices=("wrr", "iwrr", "both"), default="both")
    m.add_argument("--policy", choices=POLICIES, default="random")
    m.add_argument("--horizon", default=None, help="seconds (default: 50 saturated rounds)")
    m.add_argument("--events", help="write the tab-separated event log here "
                   "(with --scheduler both: PATH.wrr and PATH.iwrr)")
    return p


_DEFAULT_SCENARIO = {"curves": "fig2", "delay-sweep": "fig2", "simulate": "fig2"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    exact = args.exact
    try:
        scenario = _load(args.scenario or _DEFAULT_SCENARIO.get(args.verb, "fig3"), exact)
        conv = args.convention
        if args.verb == "curves":
            header, rows = cmd_curves(scenario, _number(args.t_max, exact), args.samples, conv)
        elif args.verb == "delay-sweep":
            header, rows = cmd_delay_sweep(scenario, _number(args.u_from, exact),
                                           _number(args.u_to, exact), args.steps, conv)
        elif args.verb == "burst-classes":
            mixes = [tuple(_ints(m)) for m in args.mixes.split(";") if m.strip()]
            header, rows = cmd_burst_classes(scenario, mixes, conv)
        elif args.verb == "psr-sweep":
            header, rows = cmd_psr_sweep(scenario, _numbers(args.psr, exact),
                                         tuple(_ints(args.counts)), conv)
        elif args.verb == "flow-count":
            header, rows = cmd_flow_count(scenario, _ints(args.k), conv)
        elif args.verb == "heuristic-table":
            header, rows = cmd_heuristic_table(scenario, _ints(args.totals), conv)
        else:
            horizon = None if args.horizon is None else _number(args.horizon, exact)
            try:
                header, rows, sims = cmd_simulate(scenario, args.scheduler, args.seed,
                                                  horizon, args.policy)
            except BoundViolation as exc:
                print(f"bound violation: {exc}", file=sys.stderr)
                print("\n".join(exc.events), file=sys.stderr)
                return 1
            if args.events:
                for sch, sim in sims.items():
                    path = args.events if len(sims) == 1 else f"{args.events}.{sch}"
                    with open(path, "w") as fh:
                        fh.write(format_event_log(sim.events))
            print(f"validation passed: {len(rows)} checks", file=sys.stderr)
    except (RRBoundsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = to_csv(header, rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
