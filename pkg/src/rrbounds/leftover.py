"""Strict leftover service curves for the flow of interest under WRR and IWRR.

Two families are provided.  The traffic-agnostic curves (``wrr_stair_curve``,
``wrr_linear_curve``, ``iwrr_curve``) depend only on weights and packet sizes.
The traffic-aware curves (``wrr_m_curve``, ``iwrr_m_curve``) treat the
scheduler as a bandwidth-sharing policy and use the arrival curves of the
flows outside a subset ``M``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

from .curves import (Curve, add, compose, constant, min_plus_conv, pointwise_max,
                     rate_latency, scale, stair, sub_positive, token_bucket)
from .errors import InvalidParameter, UnstableSlopeWarning, UnsupportedServer, ZeroResidualWarning
from .scenario import ConstantRate, Scenario


def _foi(scenario: Scenario, i: Optional[int]) -> int:
    i = scenario.foi if i is None else i
    if not 0 <= i < scenario.n:
        raise InvalidParameter(f"flow index {i} out of range")
    return i


def q_of(scenario: Scenario, i: Optional[int] = None):
    """Guaranteed bits per round for flow ``i``: ``w_i * l_min_i``."""
    f = scenario.flows[_foi(scenario, i)]
    return f.weight * f.l_min


def Q_of(scenario: Scenario, i: Optional[int] = None):
    """Worst-case bits per round served to all other flows."""
    i = _foi(scenario, i)
    return sum((f.weight * f.l_max for k, f in enumerate(scenario.flows) if k != i),
               0 * scenario.flows[i].l_min)


def wrr_stair_curve(scenario: Scenario) -> Curve:
    beta = scenario.server.curve
    q, Q = q_of(scenario), Q_of(scenario)
    gamma = min_plus_conv(rate_latency(1, 0), stair(q, q + Q))
    return compose(gamma, sub_positive(beta, constant(Q)))


def wrr_linear_curve(scenario: Scenario) -> Curve:
    beta = scenario.server.curve
    q, Q = q_of(scenario), Q_of(scenario)
    return scale(sub_positive(beta, constant(Q)), q / (q + Q))


def psi_cap(w_i: int, w_j: int, p: int) -> int:
    """Max packets of a flow with weight ``w_j`` served while one with ``w_i`` gets ``p``."""
    if p < 0:
        raise InvalidParameter("p must be nonnegative")
    return (p // w_i) * w_j + max(w_j - w_i, 0) + min(p % w_i + 1, w_j)


def psi_total(scenario: Scenario, x, i: Optional[int] = None):
    """Worst-case total service needed before flow ``i`` has received ``x`` bits."""
    i = _foi(scenario, i)
    fi = scenario.flows[i]
    p = math.floor(x / fi.l_min)
    return x + sum((psi_cap(fi.weight, f.weight, p) * f.l_max
                    for k, f in enumerate(scenario.flows) if k != i), 0 * fi.l_min)


def iwrr_curve(scenario: Scenario) -> Curve:
    beta = scenario.server.curve
    fi = scenario.flows[scenario.foi]
    total = q_of(scenario) + Q_of(scenario)
    step = stair(fi.l_min, total)
    u = None
    for k in range(fi.weight):
        shifted = compose(step, rate_latency(1, psi_total(scenario, k * fi.l_min)))
        u = shifted if u is None else add(u, shifted)
    return compose(min_plus_conv(rate_latency(1, 0), u), beta)


@dataclass(frozen=True)
class BspParams:
    """Bandwidth-sharing parameters as seen from flow ``foi``: shares ``phi`` and offsets ``H``."""

    foi: int
    phi: Tuple
    H: Tuple


def wrr_bsp_params(scenario: Scenario, i: Optional[int] = None) -> BspParams:
    i = _foi(scenario, i)
    phi = tuple(f.weight * (f.l_min if k == i else f.l_max)
                for k, f in enumerate(scenario.flows))
    H = tuple(0 * phi[k] if k == i else phi[k] for k in range(scenario.n))
    return BspParams(i, phi, H)


def iwrr_bsp_params(scenario: Scenario, i: Optional[int] = None) -> Tuple[BspParams, BspParams]:
    """Returns ``(iwrr_params, wrr_params)``; the IWRR curve is the max over both."""
    i = _foi(scenario, i)
    wi = scenario.flows[i].weight
    phi, H = [], []
    for k, f in enumerate(scenario.flows):
        if k == i:
            phi.append(q_of(scenario, i))
            H.append(0 * f.l_max)
        else:
            phi.append((f.weight + wi) * f.l_max)
            H.append((max(f.weight - wi, 0) + 1) * f.l_max)
    return BspParams(i, tuple(phi), tuple(H)), wrr_bsp_params(scenario, i)


def normalize_subset(scenario: Scenario, M: Iterable[int], i: Optional[int] = None) -> frozenset:
    """Validate ``M`` and add the flows that have no arrival curve (they must be in ``M``)."""
    i = _foi(scenario, i)
    M = frozenset(M)
    if i not in M:
        raise InvalidParameter(f"subset must contain the flow of interest {i}")
    if any(not 0 <= k < scenario.n for k in M):
        raise InvalidParameter("subset contains an unknown flow index")
    return M | {k for k, f in enumerate(scenario.flows) if not f.constrained}


def _require_convex(scenario: Scenario) -> None:
    if not getattr(scenario.server, "convex", False):
        raise UnsupportedServer(
            "traffic-aware curves need a convex aggregate service curve; "
            "declare GeneralService(curve, convex=True) if it is")


def _share(params: BspParams, M):
    return params.phi[params.foi] / sum(params.phi[k] for k in M)


def _warn_zero(curve: Curve) -> None:
    if curve.rate == 0 and curve.v0 == 0 and all(y == 0 for y in curve.ys):
        warnings.warn("residual capacity is exhausted; leftover curve is identically zero",
                      ZeroResidualWarning, stacklevel=3)


def bsp_leftover_for_subset(scenario: Scenario, params: BspParams, M: Iterable[int]) -> Curve:
    """One term of the bandwidth-sharing leftover curve, for the subset ``M``."""
    _require_convex(scenario)
    M = normalize_subset(scenario, M, params.foi)
    beta = scenario.server.curve
    offset = sum((params.H[k] for k in M), 0 * params.phi[params.foi])
    cut = constant(offset)
    for k, f in enumerate(scenario.flows):
        if k not in M:
            cut = add(cut, token_bucket(f.arrival.rate, f.arrival.burst))
    with warnings.catch_warnings():
        # reported below as a zero residual instead
        warnings.simplefilter("ignore", UnstableSlopeWarning)
        curve = scale(sub_positive(beta, cut), _share(params, M))
    _warn_zero(curve)
    return curve


def bsp_rate_latency(scenario: Scenario, params: BspParams, M: Iterable[int]):
    """Closed form ``(R, T)`` of one term for a constant-rate server; ``(0, inf)`` if zero."""
    if not isinstance(scenario.server, ConstantRate):
        raise UnsupportedServer("closed form needs a constant-rate server")
    M = normalize_subset(scenario, M, params.foi)
    C = scenario.server.rate
    rest = C - sum((f.arrival.rate for k, f in enumerate(scenario.flows) if k not in M), 0 * C)
    if rest <= 0:
        return 0 * C, math.inf
    burst = sum((f.arrival.burst for k, f in enumerate(scenario.flows) if k not in M), 0 * C)
    burst += sum((params.H[k] for k in M), 0 * C)
    return _share(params, M) * rest, burst / rest


def wrr_m_curve(scenario: Scenario, M: Iterable[int]) -> Curve:
    return bsp_leftover_for_subset(scenario, wrr_bsp_params(scenario), M)


def iwrr_m_curve(scenario: Scenario, M: Iterable[int]) -> Curve:
    iw, w = iwrr_bsp_params(scenario)
    M = frozenset(M)
    return pointwise_max(bsp_leftover_for_subset(scenario, iw, M),
                         bsp_leftover_for_subset(scenario, w, M))


def rate_latency_or_zero(R, T) -> Curve:
    if R == 0 or T == math.inf:
        return constant(0 * R)
    return rate_latency(R, T)
