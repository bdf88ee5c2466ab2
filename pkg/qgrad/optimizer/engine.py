"""
Iteration engines
...

The quantized recursion x(t+1) = [x(t) - gamma(t) d(t)]_X with d(t) in D, its
O(N) sign/orthant special case, two unquantized reference recursions, and the
run loop that drives any of them to a stopping rule.
"""
import dataclasses
import enum
import logging
import math
import numpy as np
import qgrad.constants as constants
from qgrad.exceptions import DimensionError, DomainError, ParameterError, StoppingRuleError
from qgrad.optimizer.domain import DomainKind
from qgrad.optimizer.trace import RunTrace
from qgrad.quantization.directions import SetKind, bits_per_iteration

logger = logging.getLogger(__name__)


def _as_point(x, gradient):
    x = np.asarray(x, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    if x.ndim != 1 or x.shape != gradient.shape:
        raise DimensionError(f"Error: point has shape {x.shape}, gradient has {gradient.shape}")
    return x, gradient


def _check_gamma(gamma):
    if not gamma >= 0.0:
        raise ParameterError(f"Error: step size must be nonnegative, got {gamma!r}")


def qgm_step(x, gradient, quantization_set, gamma, domain):
    """
    Summary:
    One step of the quantized gradient recursion

    Parameters:
    x : array_like
        feasible current point
    gradient : array_like
        gradient of f at x
    quantization_set : QuantizationSet
        direction set D of matching dimension
    gamma : float
        nonnegative step size
    domain : Domain
        feasible set X

    Return:
    x_next : numpy.ndarray
        project(x - gamma quantize(gradient)), or x itself when the gradient is held
    """
    x, gradient = _as_point(x, gradient)
    _check_gamma(gamma)
    if x.size != quantization_set.dims:
        raise DimensionError(f"Error: point has length {x.size}, set has N={quantization_set.dims}")
    if not domain.contains(x):
        raise DomainError(f"Error: point is not feasible for {domain!r}")
    direction = quantization_set.quantize_vector(gradient)
    if direction is None:
        return x.copy()
    return domain.project(x - gamma * direction)


def sign_projected_step(x, gradient, gamma):
    """
    Summary:
    Sign-gradient step projected on the nonnegative orthant, in O(N)

    Parameters:
    x : array_like
        point in R^N_+
    gradient : array_like
        gradient of f at x, sign(0) is taken as +1
    gamma : float
        nonnegative step size

    Return:
    x_next : numpy.ndarray
        max(x - gamma/sqrt(N) sign(gradient), 0)
    """
    x, gradient = _as_point(x, gradient)
    _check_gamma(gamma)
    if np.any(x < 0.0):
        raise DomainError("Error: sign projected step needs x in the nonnegative orthant")
    signs = np.where(gradient >= 0.0, 1.0, -1.0)
    return np.maximum(x - (gamma / math.sqrt(x.size)) * signs, 0.0)


def gradient_step(x, gradient, gamma, domain):
    """Unquantized reference: project(x - gamma grad f(x))."""
    x, gradient = _as_point(x, gradient)
    _check_gamma(gamma)
    return domain.project(x - gamma * gradient)


def normalized_step(x, gradient, gamma, domain):
    """Unquantized reference on the exact direction: project(x - gamma g/|g|), held at g = 0."""
    x, gradient = _as_point(x, gradient)
    _check_gamma(gamma)
    norm = np.linalg.norm(gradient)
    if norm <= constants.ZERO_TOLERANCE:
        return x.copy()
    return domain.project(x - (gamma / norm) * gradient)


class StoppingKind(enum.Enum):
    GRAD_NORM = "grad_norm"
    L_ALPHA = "l_alpha"
    GAP = "gap"
    MAX_ITER = "max_iter"


@dataclasses.dataclass(frozen=True)
class StoppingRule:
    """
    A stopping condition checked before each step

    Attributes:
    kind : StoppingKind
        GRAD_NORM: |grad f| <= epsilon; L_ALPHA: L_alpha(x) <= epsilon;
        GAP: f(x) - f* <= epsilon; MAX_ITER: t >= iterations
    epsilon : float or None
    alpha : float
    iterations : int or None
    """
    kind: StoppingKind
    epsilon: object = None
    alpha: float = constants.DEFAULT_ALPHA
    iterations: object = None

    def __post_init__(self):
        if self.kind is StoppingKind.MAX_ITER:
            if self.iterations is None or int(self.iterations) != self.iterations or self.iterations < 0:
                raise StoppingRuleError(f"Error: iteration limit must be an integer >= 0, got {self.iterations!r}")
            return
        if self.epsilon is None or not self.epsilon > 0.0:
            raise StoppingRuleError(f"Error: epsilon must be positive, got {self.epsilon!r}")
        if not self.alpha > 0.0:
            raise StoppingRuleError(f"Error: alpha must be positive, got {self.alpha!r}")

    @classmethod
    def grad_norm(cls, epsilon):
        return cls(StoppingKind.GRAD_NORM, epsilon=epsilon)

    @classmethod
    def l_alpha(cls, epsilon, alpha=constants.DEFAULT_ALPHA):
        return cls(StoppingKind.L_ALPHA, epsilon=epsilon, alpha=alpha)

    @classmethod
    def gap(cls, epsilon):
        return cls(StoppingKind.GAP, epsilon=epsilon)

    @classmethod
    def max_iter(cls, iterations):
        return cls(StoppingKind.MAX_ITER, iterations=iterations)

    def to_dict(self):
        data = {"kind": self.kind.value}
        if self.kind is StoppingKind.MAX_ITER:
            data["iterations"] = self.iterations
        else:
            data["epsilon"] = self.epsilon
        if self.kind is StoppingKind.L_ALPHA:
            data["alpha"] = self.alpha
        return data


class RunMethod(enum.Enum):
    QUANTIZED = "quantized"
    GRADIENT = "gradient"
    NORMALIZED = "normalized"


def _as_rules(stopping):
    if stopping is None:
        return []
    if isinstance(stopping, StoppingRule):
        return [stopping]
    return list(stopping)


def run(oracle, quantization_set, schedule, stopping=None, max_iter=constants.DEFAULT_MAX_ITER,
        record_x=False, x0=None, alpha=constants.DEFAULT_ALPHA, method=RunMethod.QUANTIZED):
    """
    Summary:
    Drive a recursion from x0 until a stopping rule holds or max_iter steps

    Parameters:
    oracle : ObjectiveOracle
        objective, gradient, domain and optional f*
    quantization_set : QuantizationSet or None
        direction set D; None only for the unquantized reference methods
    schedule : StepSchedule
        gamma(t)
    stopping : StoppingRule, list of StoppingRule or None
        rules evaluated before each step, so a hit at t = 0 is possible
    max_iter : int
        largest number of steps
    record_x : bool
        keep every iterate in the trace
    x0 : array_like or None
        initial point, oracle.initial_point() by default
    alpha : float
        parameter of the recorded optimality measure L_alpha
    method : RunMethod
        QUANTIZED (sign fast path for sign sets on the orthant), or one of the
        unquantized references GRADIENT and NORMALIZED

    Return:
    trace : RunTrace
        with primal objective and residual columns when the oracle has primal_values(x)
    """
    method = RunMethod(method) if not isinstance(method, RunMethod) else method
    rules = _as_rules(stopping)
    if int(max_iter) != max_iter or max_iter < 0:
        raise ParameterError(f"Error: max_iter must be an integer >= 0, got {max_iter!r}")
    max_iter = int(max_iter)
    domain = oracle.domain
    orthant = domain.kind is DomainKind.NONNEGATIVE_ORTHANT
    for rule in rules:
        if rule.kind is StoppingKind.GAP and oracle.f_star is None:
            raise StoppingRuleError("Error: gap stopping rule needs a known optimal value f*")
        if rule.kind is StoppingKind.L_ALPHA and not orthant:
            raise StoppingRuleError(
                f"Error: L_alpha stopping rule needs the nonnegative orthant, problem domain is {domain.kind.value}"
            )
        if rule.kind is StoppingKind.MAX_ITER:
            max_iter = min(max_iter, int(rule.iterations))

    if method is RunMethod.QUANTIZED:
        if quantization_set is None:
            raise ParameterError("Error: the quantized method needs a quantization set")
        if quantization_set.dims != oracle.dims:
            raise DimensionError(
                f"Error: quantization set has N={quantization_set.dims}, problem has N={oracle.dims}"
            )
        bits = bits_per_iteration(quantization_set)
    else:
        # unquantized references send N doubles per step
        bits = 64 * oracle.dims

    x = np.array(oracle.initial_point() if x0 is None else x0, dtype=float)
    if x.shape != (oracle.dims,):
        raise DimensionError(f"Error: initial point has shape {x.shape}, expected ({oracle.dims},)")
    if not domain.contains(x):
        raise DomainError(f"Error: initial point is not feasible for {domain!r}")
    x = domain.project(x)

    sign_fast = (method is RunMethod.QUANTIZED and orthant and quantization_set.kind is SetKind.SIGN)
    scale = 1.0 / math.sqrt(oracle.dims)
    f_values = np.empty(max_iter + 1)
    grad_norms = np.empty(max_iter + 1)
    l_alphas = np.full(max_iter + 1, np.nan)
    gammas = np.empty(max_iter + 1)
    xs = np.empty((max_iter + 1, oracle.dims)) if record_x else None
    primal_values = getattr(oracle, "primal_values", None)
    primal_objective = np.empty(max_iter + 1) if primal_values is not None else None
    primal_residual = np.empty(max_iter + 1) if primal_values is not None else None
    f_star = oracle.f_star

    hit_iteration = None
    stop_reason = "max_iter"
    non_descent = 0
    t = 0
    while True:
        value, gradient = oracle.value_and_grad(x)
        norm = float(np.linalg.norm(gradient))
        gamma = float(schedule(t))
        f_values[t] = value
        grad_norms[t] = norm
        gammas[t] = gamma
        if orthant:
            l_alphas[t] = np.linalg.norm(x - np.maximum(x - alpha * gradient, 0.0))
        if record_x:
            xs[t] = x
        if primal_values is not None:
            primal_objective[t], primal_residual[t] = primal_values(x)

        for rule in rules:
            if rule.kind is StoppingKind.GRAD_NORM:
                met = norm <= rule.epsilon
            elif rule.kind is StoppingKind.L_ALPHA:
                met = np.linalg.norm(x - np.maximum(x - rule.alpha * gradient, 0.0)) <= rule.epsilon
            elif rule.kind is StoppingKind.GAP:
                met = value - f_star <= rule.epsilon
            else:
                met = False
            if met:
                hit_iteration, stop_reason = t, rule.kind.value
                break
        if hit_iteration is not None or t == max_iter:
            break

        # hold rule: a vanishing gradient leaves x in place for every method
        if norm > constants.ZERO_TOLERANCE:
            if sign_fast:
                x = np.maximum(x - (gamma * scale) * np.where(gradient >= 0.0, 1.0, -1.0), 0.0)
            elif method is RunMethod.QUANTIZED:
                direction = quantization_set.quantize_vector(gradient)
                if direction @ gradient <= 0.0:
                    non_descent += 1
                x = domain.project(x - gamma * direction)
            elif method is RunMethod.GRADIENT:
                x = domain.project(x - gamma * gradient)
            else:
                x = domain.project(x - (gamma / norm) * gradient)
        t += 1

    count = t + 1
    trace = RunTrace(
        f=f_values[:count],
        grad_norm=grad_norms[:count],
        l_alpha=l_alphas[:count],
        gamma=gammas[:count],
        bits_per_iteration=bits,
        x_final=x.copy(),
        hit_iteration=hit_iteration,
        stop_reason=stop_reason,
        xs=None if xs is None else xs[:count],
        primal_objective=None if primal_objective is None else primal_objective[:count],
        primal_residual=None if primal_residual is None else primal_residual[:count],
    )
    primal = getattr(oracle, "primal_summary", None)
    if primal is not None:
        trace.primal = primal(x)
    if non_descent:
        logger.warning("%d of %d steps used a direction that is not a descent direction", non_descent, t)
    logger.info(
        "run stopped at t=%d (%s), f=%.6g, |grad|=%.3g, %d bits",
        t, stop_reason, f_values[t], grad_norms[t], t * bits,
    )
    return trace
