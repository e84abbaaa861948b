"""Worst-case delay bounds for flows served by WRR and IWRR schedulers.

Exact min-plus curves, leftover service curves, subset optimization and a
packet-level simulator to check the bounds against.
"""

from .curves import (Curve, RateLatencySpec, StairSpec, TokenBucketSpec, add, affine, compose,
                     constant, horizontal_deviation, long_term_rate, make_rate_latency,
                     make_stair, make_token_bucket, min_plus_conv, pointwise_max,
                     pointwise_min, rate_latency, stair, sub_positive, token_bucket, zero)
from .errors import (BoundViolation, CurveDomainError, CurveError, InvalidParameter,
                     RRBoundsError, SubsetLimitExceeded, UnstableCombination,
                     UnstableSlopeWarning, UnsupportedServer, ZeroResidualWarning)
from .leftover import (BspParams, Q_of, bsp_leftover_for_subset, iwrr_bsp_params, iwrr_curve,
                       iwrr_m_curve, psi_cap, psi_total, q_of, wrr_bsp_params, wrr_linear_curve,
                       wrr_m_curve, wrr_stair_curve)
from .scenario import (ConstantRate, FlowSpec, GeneralService, Scenario, bundled_scenario,
                       load_scenario, save_scenario)
from .search import (DelayBoundResult, all_bounds, delay_bound, exhaustive_best,
                     greedy_heuristic, sweep)
from .sim import (PacketTrace, SimResult, greedy_source, run_iwrr, run_wrr, simulate,
                  validate_bounds)

__version__ = "0.1.0"


def __getattr__(name):
    # the estimator pulls in scikit-learn; load it only when asked for
    if name == "LeftoverCurveEstimator":
        from .estimator import LeftoverCurveEstimator
        return LeftoverCurveEstimator
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
