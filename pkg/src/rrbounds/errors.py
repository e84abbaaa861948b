"""Exception and warning types raised by rrbounds."""


class RRBoundsError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(RRBoundsError, ValueError):
    pass


class CurveDomainError(RRBoundsError, ValueError):
    """A curve was evaluated outside of [0, +inf)."""


class CurveError(RRBoundsError):
    """An operation cannot produce a representable curve."""


class UnstableCombination(CurveError):
    """``[f - g]^+`` is not nondecreasing."""


class UnsupportedServer(RRBoundsError):
    pass


class SubsetLimitExceeded(RRBoundsError):
    pass


class BoundViolation(RRBoundsError, AssertionError):
    """A simulated delay exceeded a computed worst-case bound."""

    def __init__(self, message, events=None):
        super().__init__(message)
        self.events = list(events or [])


class ZeroResidualWarning(UserWarning):
    """A leftover curve degenerated to the zero function."""


class UnstableSlopeWarning(UserWarning):
    """``[f - g]^+`` was taken with ``g`` outgrowing ``f``; the result is clipped to zero."""
