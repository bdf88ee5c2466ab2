"""
Exceptions raised across qgrad
...

Every message starts with "Error: " and names the condition that failed.
"""


class QgradError(Exception):
    """Base class of every error raised by qgrad."""


class DimensionError(QgradError, ValueError):
    """A vector does not have the length its context requires."""


class QuantizationError(QgradError, ValueError):
    """A direction set cannot be built, loaded or analysed as requested."""


class ScheduleError(QgradError, ValueError):
    """A step-size schedule violates a convergence condition."""


class StoppingRuleError(QgradError, ValueError):
    """A stopping rule is malformed or cannot be evaluated for a problem."""


class BoundsError(QgradError, ValueError):
    """A bound calculator is missing constants or got out-of-range inputs."""


class InadmissibleStepError(BoundsError):
    """
    A step size outside the interval where a bound applies

    Attributes:
    gamma : float
        the rejected step size
    interval : tuple
        the admissible open interval (low, high)
    """
    def __init__(self, gamma, interval, formula):
        self.gamma = gamma
        self.interval = interval
        self.formula = formula
        super().__init__(
            f"Error: step size {gamma!r} is outside the admissible interval "
            f"({interval[0]!r}, {interval[1]!r}) for {formula}"
        )


class ProblemError(QgradError, ValueError):
    """A problem instance or oracle query is invalid."""


class KinkProximityError(ProblemError):
    """A finite-difference point sits too close to a subproblem kink."""


class ConfigError(QgradError, ValueError):
    """An experiment configuration fails validation."""


class ParameterError(QgradError, ValueError):
    """A scalar parameter lies outside its documented range."""


class DomainError(QgradError, ValueError):
    """A point lies outside the feasible domain an operation requires."""
