import dataclasses
import enum
import numpy as np
import qgrad.constants as constants
from qgrad.exceptions import DimensionError, DomainError, ParameterError


class DomainKind(enum.Enum):
    UNCONSTRAINED = "unconstrained"
    NONNEGATIVE_ORTHANT = "orthant"
    BOX = "box"
    BALL = "ball"


class Domain(object):
    """
    A class to represent the feasible set X of an iteration
    ...
    Attributes:
    kind : DomainKind
        unconstrained, nonnegative orthant, box or Euclidean ball
    lower, upper : numpy.ndarray or float or None
        finite box bounds with lower <= upper
    center : numpy.ndarray or None
    radius : float or None
        ball center and positive radius

    Methods:
    project(x)
        Euclidean projection onto X
    contains(x)
        feasibility within NEGATIVE_TOLERANCE
    """
    def __init__(self, kind=DomainKind.UNCONSTRAINED, lower=None, upper=None, center=None, radius=None):
        self.kind = DomainKind(kind) if not isinstance(kind, DomainKind) else kind
        self.lower = None
        self.upper = None
        self.center = None
        self.radius = None
        if self.kind is DomainKind.BALL:
            center = np.asarray(center, dtype=float)
            if center.ndim != 1 or not np.all(np.isfinite(center)):
                raise DomainError("Error: ball center must be a finite vector")
            if radius is None or not 0.0 < float(radius) < np.inf:
                raise DomainError(f"Error: ball radius must be positive and finite, got {radius!r}")
            self.center = center
            self.radius = float(radius)
        if self.kind is DomainKind.BOX:
            lower = np.asarray(lower, dtype=float)
            upper = np.asarray(upper, dtype=float)
            if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
                raise DomainError("Error: box bounds must be finite")
            if np.any(lower > upper):
                raise DomainError("Error: box needs lower <= upper componentwise")
            self.lower = lower
            self.upper = upper

    @classmethod
    def unconstrained(cls):
        return cls(DomainKind.UNCONSTRAINED)

    @classmethod
    def orthant(cls):
        return cls(DomainKind.NONNEGATIVE_ORTHANT)

    @classmethod
    def box(cls, lower, upper):
        return cls(DomainKind.BOX, lower, upper)

    @classmethod
    def ball(cls, center, radius):
        return cls(DomainKind.BALL, center=center, radius=radius)

    def _check_box_shape(self, x):
        for bound in (self.lower, self.upper):
            if bound.ndim and bound.shape != x.shape:
                raise DimensionError(f"Error: box bounds have shape {bound.shape}, point has {x.shape}")

    def _check_ball_shape(self, x):
        if x.shape != self.center.shape:
            raise DimensionError(f"Error: ball center has shape {self.center.shape}, point has {x.shape}")

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is DomainKind.UNCONSTRAINED:
            return x.copy()
        if self.kind is DomainKind.NONNEGATIVE_ORTHANT:
            return np.maximum(x, 0.0)
        if self.kind is DomainKind.BALL:
            self._check_ball_shape(x)
            offset = x - self.center
            distance = float(np.linalg.norm(offset))
            if distance <= self.radius:
                return x.copy()
            return self.center + offset * (self.radius / distance)
        self._check_box_shape(x)
        return np.clip(x, self.lower, self.upper)

    def contains(self, x, tolerance=constants.NEGATIVE_TOLERANCE):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return False
        if self.kind is DomainKind.UNCONSTRAINED:
            return True
        if self.kind is DomainKind.NONNEGATIVE_ORTHANT:
            return bool(np.all(x >= -tolerance))
        if self.kind is DomainKind.BALL:
            self._check_ball_shape(x)
            return bool(np.linalg.norm(x - self.center) <= self.radius + tolerance)
        self._check_box_shape(x)
        return bool(np.all(x >= self.lower - tolerance) and np.all(x <= self.upper + tolerance))

    def to_dict(self):
        data = {"kind": self.kind.value}
        if self.kind is DomainKind.BOX:
            data["lower"] = self.lower.tolist()
            data["upper"] = self.upper.tolist()
        if self.kind is DomainKind.BALL:
            data["center"] = self.center.tolist()
            data["radius"] = self.radius
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(DomainKind(data["kind"]), data.get("lower"), data.get("upper"),
                   data.get("center"), data.get("radius"))

    def __repr__(self):
        return f"Domain({self.kind.value})"


def project(x, domain):
    """
    Summary:
    Euclidean projection of x onto a domain

    Parameters:
    x : array_like
        point with finite coordinates
    domain : Domain
        the feasible set

    Return:
    point : numpy.ndarray
        clamp for orthant and box, radial shrink for a ball, identity when unconstrained
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Error: cannot project a point with non-finite coordinates")
    return domain.project(x)


def measure_L_alpha(x, gradient, alpha=constants.DEFAULT_ALPHA):
    """
    Summary:
    Optimality measure on the nonnegative orthant

    Parameters:
    x : array_like
        point in R^N_+
    gradient : array_like
        gradient of f at x
    alpha : float
        positive scaling of the gradient

    Return:
    value : float
        |x - max(x - alpha grad f(x), 0)|, zero exactly at constrained optima
    """
    x = np.asarray(x, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    if not alpha > 0.0:
        raise ParameterError(f"Error: alpha must be positive, got {alpha!r}")
    if x.shape != gradient.shape:
        raise DimensionError(f"Error: point has shape {x.shape}, gradient has {gradient.shape}")
    if np.any(x < -constants.NEGATIVE_TOLERANCE):
        raise DomainError("Error: optimality measure needs a point in the nonnegative orthant")
    return float(np.linalg.norm(x - np.maximum(x - alpha * gradient, 0.0)))


@dataclasses.dataclass(frozen=True)
class ProjectionMargins:
    """
    Both sides (lhs, rhs) of the three scalar projection inequalities

    scaling  : beta |x - max(x - z, 0)|        <= |x - max(x - beta z, 0)|
    monotone : |x - max(x - alpha1 z, 0)|      <= |x - max(x - alpha2 z, 0)|
    sign     : 0                               <= z (x - max(x - alpha1 z, 0))
    """
    scaling: tuple
    monotone: tuple
    sign: tuple
    slack: float

    @property
    def holds(self):
        return tuple(lhs <= rhs + self.slack for lhs, rhs in (self.scaling, self.monotone, self.sign))

    def all(self):
        return all(self.holds)


def _residual(x, step):
    return abs(x - max(x - step, 0.0))


def scalar_projection_margins(x, z, alpha1=1.0, alpha2=1.0, beta=1.0):
    """
    Summary:
    Evaluate the scalar projection inequalities for one admissible tuple

    Parameters:
    x : float
        nonnegative point
    z : float
        any real
    alpha1, alpha2 : float
        scalings with 0 <= alpha1 <= alpha2
    beta : float
        scaling in [0, 1]

    Return:
    margins : ProjectionMargins
        sides of each inequality and which of them hold
    """
    if not 0.0 <= beta <= 1.0:
        raise ParameterError(f"Error: beta must lie in [0, 1], got {beta!r}")
    if x < 0.0:
        raise ParameterError(f"Error: x must be nonnegative, got {x!r}")
    if alpha1 < 0.0 or alpha2 < 0.0:
        raise ParameterError(f"Error: alpha1 and alpha2 must be nonnegative, got {alpha1!r}, {alpha2!r}")
    if alpha1 > alpha2:
        raise ParameterError(f"Error: need alpha1 <= alpha2, got {alpha1!r} > {alpha2!r}")
    scaling = (beta * _residual(x, z), _residual(x, beta * z))
    monotone = (_residual(x, alpha1 * z), _residual(x, alpha2 * z))
    sign = (0.0, z * (x - max(x - alpha1 * z, 0.0)))
    slack = constants.MARGIN_SLACK * (1.0 + abs(x) + abs(z) * (1.0 + alpha2))
    return ProjectionMargins(scaling, monotone, sign, slack)
