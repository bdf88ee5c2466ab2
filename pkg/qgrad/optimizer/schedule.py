import dataclasses
import enum
import math
import numpy as np
from qgrad.exceptions import ScheduleError


class ScheduleKind(enum.Enum):
    CONSTANT = "constant"
    POWER = "power"


@dataclasses.dataclass(frozen=True)
class StepSchedule:
    """
    Step size gamma(t) as a function of the iteration index

    Attributes:
    kind : ScheduleKind
        CONSTANT gives gamma(t) = gamma, POWER gives gamma0 / (1 + t)^power
    gamma : float or None
        constant step size
    gamma0 : float or None
        initial step of the power family
    power : float or None
        exponent p in (0, 1]
    """
    kind: ScheduleKind
    gamma: object = None
    gamma0: object = None
    power: object = None

    def __call__(self, t):
        if self.kind is ScheduleKind.CONSTANT:
            return self.gamma
        return self.gamma0 / (1.0 + t) ** self.power

    def values(self, count):
        """gamma(0), ..., gamma(count - 1) as an array."""
        if self.kind is ScheduleKind.CONSTANT:
            return np.full(count, self.gamma, dtype=float)
        return self.gamma0 / (1.0 + np.arange(count, dtype=float)) ** self.power

    def to_dict(self):
        if self.kind is ScheduleKind.CONSTANT:
            return {"kind": self.kind.value, "gamma": self.gamma}
        return {"kind": self.kind.value, "gamma0": self.gamma0, "power": self.power}


def _positive(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ScheduleError(f"Error: {name} must be a number, got {value!r}")
    if not math.isfinite(value) or value <= 0.0:
        raise ScheduleError(f"Error: {name} must be a positive finite number, got {value!r}")
    return value


def make_schedule(kind, gamma=None, gamma0=None, power=None):
    """
    Summary:
    Build and validate a step-size schedule

    Parameters:
    kind : ScheduleKind or str
        "constant" or "power"
    gamma : float
        constant step, > 0
    gamma0 : float
        initial step of the power family, > 0
    power : float
        exponent in (0, 1]; p > 1 makes sum gamma(t) finite and p <= 0 keeps
        gamma(t) from converging to zero

    Return:
    schedule : StepSchedule
    """
    try:
        kind = ScheduleKind(kind) if not isinstance(kind, ScheduleKind) else kind
    except ValueError:
        raise ScheduleError(f"Error: unknown schedule kind {kind!r}")
    if kind is ScheduleKind.CONSTANT:
        return StepSchedule(kind, gamma=_positive("gamma", gamma))
    gamma0 = _positive("gamma0", gamma0)
    try:
        power = float(power)
    except (TypeError, ValueError):
        raise ScheduleError(f"Error: power must be a number, got {power!r}")
    if power > 1.0:
        raise ScheduleError(
            f"Error: summable schedule: power {power!r} > 1 makes the sum of gamma(t) finite"
        )
    if not power > 0.0:
        raise ScheduleError(
            f"Error: power {power!r} <= 0 keeps gamma(t) from converging to zero"
        )
    return StepSchedule(kind, gamma0=gamma0, power=power)
