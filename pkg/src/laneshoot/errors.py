"""Exception types shared across the package."""


class LaneShootError(Exception):
    """Base class for all package errors."""


class ProfileError(LaneShootError):
    """A warping function violates the model-manifold contract."""


class QuadratureError(LaneShootError):
    """Adaptive quadrature failed to converge.

    Carries the best estimate and the achieved error bound so callers can
    decide whether the partial result is usable.
    """

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class AmbiguousCompleteness(LaneShootError):
    """Tail behaviour of the volume-surface ratio could not be resolved.

    The caller must supply ``completeness_hint`` on the profile.
    """


class IntegrationError(LaneShootError):
    """Base class for shot-integration failures."""


class StepSizeUnderflow(IntegrationError):
    """The step controller drove the step size to zero (blow-up suspicion)."""


class MaxStepsExceeded(IntegrationError):
    """The step budget ran out before a classification was reached."""


class SimultaneousZero(IntegrationError):
    """Both components fell below the positivity margin in one step.

    An exact simultaneous zero is impossible for critical-supercritical
    exponents, so this signals that the integration tolerance is too loose.
    """


class BracketConfirmationFailed(LaneShootError):
    """A seed value did not classify as the membership threshold guarantees."""


class BracketInvariantBroken(LaneShootError):
    """A bisection endpoint classified contrary to the monotone structure."""


class NoGlobalProxyFound(LaneShootError):
    """Scanning the feasibility interval produced no positive-to-horizon shot."""


class MonotonicityViolation(LaneShootError):
    """Traced curve or band values failed to increase along the grid."""


class EnclosureTooWide(LaneShootError):
    """The tail bound cannot certify the limit to the requested width."""
