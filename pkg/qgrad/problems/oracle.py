import dataclasses
import logging
import math
import numpy as np
from scipy.optimize import minimize
import qgrad.constants as constants
from qgrad.exceptions import DimensionError, DomainError, KinkProximityError, ParameterError, ProblemError
from qgrad.optimizer.domain import Domain, DomainKind
from qgrad.random_streams import make_rng

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class ReferenceSolution:
    """Numerical minimiser of an oracle found by a centralized solver."""
    x: np.ndarray
    value: float
    grad_norm: float


class ObjectiveOracle(object):
    """
    A class to represent a convex objective with Lipschitz gradient
    ...
    Attributes:
    dims : int
        dimension N
    domain : Domain
        feasible set of the iteration
    lipschitz : float
        reported Lipschitz constant L of the gradient
    grad_bound : float or None
        bound B on the gradient norm
    mu : float or None
        strong convexity modulus
    f_star : float or None
        optimal value when known
    x_star : numpy.ndarray or None
        an optimal point when known
    sample_scale : float
        spread of generic sample points

    Methods:
    eval(x), grad(x), value_and_grad(x)
        objective and gradient
    initial_point()
        default x(0)
    active_signature(x)
        tolerance-classified active sets of the inner subproblems, None when smooth
    estimate_lipschitz(seed, pairs)
        1.1 times the largest sampled gradient difference quotient
    reference_solution()
        centralized L-BFGS-B solve
    """
    family = "generic"
    dims = 0
    lipschitz = None
    grad_bound = None
    mu = None
    f_star = None
    x_star = None
    sample_scale = 1.0

    def __init__(self, dims, domain=None):
        self.dims = int(dims)
        self.domain = Domain.unconstrained() if domain is None else domain

    def value_and_grad(self, x):
        raise NotImplementedError

    def eval(self, x):
        return self.value_and_grad(x)[0]

    def grad(self, x):
        return self.value_and_grad(x)[1]

    def initial_point(self):
        return np.zeros(self.dims)

    def active_signature(self, x):
        return None

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dims,):
            raise DimensionError(f"Error: point has shape {x.shape}, expected ({self.dims},)")
        if self.domain.kind is DomainKind.NONNEGATIVE_ORTHANT and np.any(x < -constants.NEGATIVE_TOLERANCE):
            raise DomainError("Error: negative entries beyond tolerance in a point of the nonnegative orthant")
        return x

    def sample_point(self, rng):
        if self.domain.kind is DomainKind.NONNEGATIVE_ORTHANT:
            return rng.uniform(0.0, self.sample_scale, self.dims)
        if self.domain.kind is DomainKind.BOX:
            return rng.uniform(self.domain.lower, self.domain.upper, self.dims)
        if self.domain.kind is DomainKind.BALL:
            radius = self.domain.radius
            return self.domain.project(rng.uniform(self.domain.center - radius, self.domain.center + radius))
        return rng.uniform(-self.sample_scale, self.sample_scale, self.dims)

    def difference_quotients(self, seed=constants.DEFAULT_SEED, pairs=constants.LIPSCHITZ_SAMPLE_PAIRS):
        """|grad f(u) - grad f(v)| / |u - v| over seeded random pairs."""
        rng = make_rng(seed, constants.STREAM_SAMPLES)
        quotients = np.empty(pairs)
        for index in range(pairs):
            u, v = self.sample_point(rng), self.sample_point(rng)
            quotients[index] = np.linalg.norm(self.grad(u) - self.grad(v)) / np.linalg.norm(u - v)
        return quotients

    def estimate_lipschitz(self, seed=constants.DEFAULT_SEED, pairs=constants.LIPSCHITZ_SAMPLE_PAIRS):
        return constants.LIPSCHITZ_SAFETY * float(np.max(self.difference_quotients(seed, pairs)))

    def reference_solution(self, x0=None, max_iter=20000):
        """
        Summary:
        Minimise the oracle with L-BFGS-B (bounds for the orthant and box domains),
        or SLSQP with the norm constraint on a ball

        Return:
        solution : ReferenceSolution
        """
        bounds = None
        if self.domain.kind is DomainKind.NONNEGATIVE_ORTHANT:
            bounds = [(0.0, None)] * self.dims
        elif self.domain.kind is DomainKind.BOX:
            lower = np.broadcast_to(self.domain.lower, (self.dims,))
            upper = np.broadcast_to(self.domain.upper, (self.dims,))
            bounds = list(zip(lower.tolist(), upper.tolist()))
        start = self.initial_point() if x0 is None else np.asarray(x0, dtype=float)
        if self.domain.kind is DomainKind.BALL:
            center, radius = self.domain.center, self.domain.radius
            result = minimize(
                lambda x: self.value_and_grad(x),
                self.domain.project(start),
                jac=True,
                method="SLSQP",
                constraints=[{"type": "ineq", "fun": lambda x: radius ** 2 - np.sum((x - center) ** 2),
                              "jac": lambda x: -2.0 * (x - center)}],
                options={"maxiter": max_iter, "ftol": 1e-15},
            )
        else:
            result = minimize(
                lambda x: self.value_and_grad(x),
                start,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": max_iter, "maxfun": 2 * max_iter, "ftol": 1e-16, "gtol": 1e-12},
            )
        x = self.domain.project(result.x)
        value, gradient = self.value_and_grad(x)
        logger.debug("reference solve for %s: %s, f=%.12g", self.family, result.message, value)
        return ReferenceSolution(x, float(value), float(np.linalg.norm(gradient)))

    def to_dict(self):
        raise ProblemError(f"Error: {self.family} oracles are not serializable")


class QuadraticOracle(ObjectiveOracle):
    """
    A class to represent f(x) = 1/2 sum_i s_i (x_i - c_i)^2
    ...
    Attributes:
    center : numpy.ndarray
        unconstrained minimiser c
    scale : numpy.ndarray
        positive curvatures s_i, L = max s_i and mu = min s_i
    x_star : numpy.ndarray
        minimiser over the domain (the clamped center)
    f_star : float
        minimal value over the domain, 0 when the center is feasible
    """
    family = "quadratic"

    def __init__(self, center, scale=1.0, domain=None, x0=None):
        center = np.asarray(center, dtype=float).reshape(-1)
        super().__init__(center.size, domain)
        scale = np.broadcast_to(np.asarray(scale, dtype=float), center.shape).copy()
        if np.any(scale <= 0.0) or not np.all(np.isfinite(scale)):
            raise ProblemError("Error: quadratic scale must be positive and finite")
        self.center = center
        self.scale = scale
        self.lipschitz = float(scale.max())
        self.mu = float(scale.min())
        self.x_star = self.domain.project(center)
        self.f_star = float(0.5 * np.sum(scale * (self.x_star - center) ** 2))
        self.sample_scale = 2.0 * (1.0 + float(np.max(np.abs(center))))
        self._x0 = None if x0 is None else np.asarray(x0, dtype=float)

    def value_and_grad(self, x):
        x = self.check_point(x)
        offset = x - self.center
        return float(0.5 * np.sum(self.scale * offset ** 2)), self.scale * offset

    def initial_point(self):
        if self._x0 is None:
            return np.zeros(self.dims)
        return self._x0.copy()

    def to_dict(self):
        return {
            "family": self.family,
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "domain": self.domain.to_dict(),
            "x0": None if self._x0 is None else self._x0.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["center"], data["scale"], Domain.from_dict(data["domain"]), data.get("x0"))


def quadratic_oracle(x_star, scale=1.0, domain=None, x0=None):
    """
    Summary:
    Quadratic test objective f(x) = (scale/2) |x - x*|^2

    Parameters:
    x_star : array_like
        minimiser
    scale : float or array_like
        positive curvature, scalar or per coordinate
    domain : Domain or None
        unconstrained by default

    Return:
    oracle : QuadraticOracle
        L = mu = scale for scalar scale, f* = 0 when x* is feasible
    """
    return QuadraticOracle(x_star, scale, domain, x0)


def random_quadratic(seed, dims, scale_range=(1.0, 10.0), spread=5.0, domain=None, substream=0):
    """Seeded quadratic with curvatures in scale_range, center in [-spread, spread]^N and x0 in [0, spread]^N."""
    if dims < 1:
        raise ProblemError(f"Error: dimension must be at least 1, got {dims}")
    rng = make_rng(seed, constants.STREAM_QUADRATIC, substream)
    scale = rng.uniform(scale_range[0], scale_range[1], dims)
    center = rng.uniform(-spread, spread, dims)
    x0 = rng.uniform(0.0, spread, dims)
    return QuadraticOracle(center, scale, domain, x0)


class ScalarBenchmarkOracle(ObjectiveOracle):
    """
    Scalar objective 0.5 (x-1)^2 for |x-1| <= 1, continued outside the band
    by one of two outer branches

    outer="constant" takes f = sign(x-1) there, so the gradient is 0 outside
    the band and jumps at x = 0 and x = 2; iterates started outside never move.
    outer="linear" takes f = |x-1| - 0.5 with gradient sign(x-1), the C^1
    continuation under which L = 1 and B = 1 hold globally. With x* = 1 either
    form shows that a step size that does not vanish, or whose sum is finite,
    keeps the iterates away from x*.
    """
    family = "scalar_benchmark"

    def __init__(self, domain=None, outer=constants.SCALAR_OUTER_BRANCHES[0]):
        if outer not in constants.SCALAR_OUTER_BRANCHES:
            raise ParameterError(f"Error: outer branch must be one of "
                                 f"{', '.join(constants.SCALAR_OUTER_BRANCHES)}, got {outer!r}")
        super().__init__(1, Domain.orthant() if domain is None else domain)
        self.outer = outer
        self.lipschitz = 1.0
        self.grad_bound = 1.0
        self.f_star = 0.0
        self.x_star = np.array([1.0])
        self.sample_scale = 3.0

    def value_and_grad(self, x):
        x = self.check_point(x)
        offset = float(x[0]) - 1.0
        if abs(offset) <= 1.0:
            return 0.5 * offset ** 2, np.array([offset])
        side = math.copysign(1.0, offset)
        if self.outer == "linear":
            return abs(offset) - 0.5, np.array([side])
        return side, np.array([0.0])

    def active_signature(self, x):
        offset = float(np.asarray(x, dtype=float)[0]) - 1.0
        if abs(offset) <= 1.0:
            return (0,)
        return (int(math.copysign(1.0, offset)),)

    def to_dict(self):
        return {"family": self.family, "domain": self.domain.to_dict(), "outer": self.outer}

    @classmethod
    def from_dict(cls, data):
        return cls(Domain.from_dict(data["domain"]), data.get("outer", constants.SCALAR_OUTER_BRANCHES[0]))


def scalar_benchmark_oracle(domain=None, outer=constants.SCALAR_OUTER_BRANCHES[0]):
    """The one-dimensional step-size counterexample, on the orthant with the constant outer branch by default."""
    return ScalarBenchmarkOracle(domain, outer)


def fd_gradient_check(oracle, x, h=constants.FD_STEP):
    """
    Summary:
    Compare the oracle gradient with central finite differences

    Parameters:
    oracle : ObjectiveOracle
        the oracle under test
    x : array_like
        point strictly inside the domain, away from subproblem kinks
    h : float
        positive difference step

    Return:
    error : float
        max over coordinates of |fd_i - g_i| / max(1, |g_i|)
    """
    if not h > 0.0:
        raise ParameterError(f"Error: finite-difference step must be positive, got {h!r}")
    x = oracle.check_point(x)
    reach = constants.KINK_DISTANCE_FACTOR * h
    if oracle.domain.kind is DomainKind.NONNEGATIVE_ORTHANT and np.any(x <= reach):
        raise DomainError("Error: finite-difference point must lie strictly inside the orthant")
    signature = oracle.active_signature(x)
    if signature is not None:
        for axis in range(oracle.dims):
            for sign in (1.0, -1.0):
                shifted = x.copy()
                shifted[axis] += sign * reach
                if oracle.active_signature(shifted) != signature:
                    raise KinkProximityError(
                        f"Error: subproblem active set changes within {reach:g} of the point along axis {axis}"
                    )
    gradient = oracle.grad(x)
    error = 0.0
    for axis in range(oracle.dims):
        step = np.zeros(oracle.dims)
        step[axis] = h
        estimate = (oracle.eval(x + step) - oracle.eval(x - step)) / (2.0 * h)
        error = max(error, abs(estimate - gradient[axis]) / max(1.0, abs(gradient[axis])))
    return float(error)
