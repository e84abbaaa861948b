"""Estimator-style wrapper: fit a leftover curve to a scenario, predict service or bounds."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import InvalidParameter
from .scenario import Scenario, check_scenario
from .search import AWARE, CONVENTIONS, SEARCHES, VARIANTS, all_bounds


def check_times(t) -> np.ndarray:
    """1-d float array of nonnegative, finite times."""
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if arr.ndim != 1:
        raise InvalidParameter("times must be a scalar or a 1-d sequence")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidParameter("times must be finite and nonnegative")
    return arr


class LeftoverCurveEstimator(BaseEstimator):
    """Leftover service curve and delay bound of one scheduler analysis.

    ``fit`` takes a Scenario (or a scenario dict); ``predict`` evaluates the
    fitted curve; ``transform`` maps scenarios to their delay bounds.
    """

    def __init__(self, variant="wrr_m", convention="strict", search="auto", n_limit=20):
        self.variant = variant
        self.convention = convention
        self.search = search
        self.n_limit = n_limit

    def _check_params(self):
        if self.variant not in VARIANTS:
            raise InvalidParameter(f"unknown variant {self.variant!r}")
        if self.convention not in CONVENTIONS:
            raise InvalidParameter(f"unknown convention {self.convention!r}")
        if self.search not in SEARCHES:
            raise InvalidParameter(f"unknown search {self.search!r}")

    def _bound(self, scenario: Scenario):
        self._check_params()
        return all_bounds(check_scenario(scenario), (self.variant,), self.convention,
                          self.search, self.n_limit)[self.variant]

    def fit(self, X, y=None):
        result = self._bound(X)
        self.result_ = result
        self.curve_ = result.curve
        self.bound_ = result.bound
        self.subset_ = result.subset if self.variant in AWARE else None
        return self

    def predict(self, t) -> np.ndarray:
        if not hasattr(self, "curve_"):
            raise NotFittedError("call fit before predict")
        return np.array([float(self.curve_(x)) for x in check_times(t)])

    def transform(self, X) -> np.ndarray:
        scenarios = [X] if isinstance(X, (Scenario, dict)) else list(X)
        return np.array([float(self._bound(s).bound) for s in scenarios])
