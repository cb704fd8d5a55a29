"""Exception types shared across the package."""


class MorreyflowError(Exception):
    """Base class for all package-specific errors."""


class RadiusTooSmall(MorreyflowError):
    """Ball radius below twice the grid spacing; volumes not comparable to R^n."""


class EmptyRadiiSet(MorreyflowError):
    pass


class WrongCoverRadius(MorreyflowError):
    pass


class ExponentOrderViolation(MorreyflowError):
    """Morrey exponent pair does not satisfy the embedding preconditions."""


class NegativeTime(MorreyflowError):
    pass


class TimeOutOfRange(MorreyflowError):
    pass


class DegenerateFit(MorreyflowError):
    """Power-law fit impossible (norms underflow or too few points)."""


class NonnegativityViolation(MorreyflowError):
    pass


class StepCollapse(MorreyflowError):
    """Adaptive time step underflowed before reaching the target time."""


class TimesNotInTrajectory(MorreyflowError):
    pass


class WindowTooLate(MorreyflowError):
    pass


class BlowupInWindow(MorreyflowError):
    pass


class InsufficientEarlySamples(MorreyflowError):
    pass


class IterationDiverged(MorreyflowError):
    pass


class OutsideTubularNeighborhood(MorreyflowError):
    """Ambient map strays too far from the unit sphere to project safely."""


class EmptyTrajectory(MorreyflowError):
    pass


class ParseError(MorreyflowError):
    """Scenario file is syntactically malformed."""


class ValidationError(MorreyflowError):
    """Scenario or problem parameters violate a documented constraint."""
