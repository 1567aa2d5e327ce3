"""Exception hierarchy shared by all pinchflow modules."""


class PinchFlowError(Exception):
    """Base class for every error raised by pinchflow."""


class ZeroMeanCurvature(PinchFlowError, ValueError):
    """|H| vanishes where a positive mean curvature is required."""


class NotPinched(PinchFlowError, ValueError):
    """The quadratic pinching condition fails."""


class InvalidSlope(PinchFlowError, ValueError):
    """Pinching slope c <= 1/n, where the refined reaction bound is singular."""


class MissingGradient(PinchFlowError, ValueError):
    """A frame without covariant derivative data was passed where one is needed."""


class Extinct(PinchFlowError, ValueError):
    """A model geometry has reached (or passed) its extinction time."""


class DegenerateImmersion(PinchFlowError, ValueError):
    """The profile curve has (numerically) vanishing speed."""


class RankDeficient(PinchFlowError, ValueError):
    """A chart Jacobian is numerically singular."""


class IndeterminateOrder(PinchFlowError, ValueError):
    """Refinement differences underflow; no convergence order can be formed."""


class NoQualifyingPoints(PinchFlowError, ValueError):
    """No sample reaches the curvature threshold."""


class BelowThreshold(PinchFlowError, ValueError):
    """The base point curvature is below the threshold the estimate requires."""


class InsufficientHistory(PinchFlowError, ValueError):
    """The recorded trajectory does not cover the requested lookback."""


class WindowExceedsDomain(PinchFlowError, ValueError):
    """A neck window wraps around the periodic profile more than once."""


class PreconditionFailed(PinchFlowError, ValueError):
    """An operation's documented precondition does not hold."""


class Blowup(PinchFlowError, ArithmeticError):
    """Time step rejected because curvature outran the step size."""


class ConfigError(PinchFlowError, ValueError):
    """Scenario configuration is malformed or violates its invariants."""
