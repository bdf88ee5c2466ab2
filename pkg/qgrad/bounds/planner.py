"""
Step-size rules and iteration bounds
...

Closed-form calculators for quantized gradient methods. Every plan returns a
BoundReport; a step size outside the interval where a formula applies is an
error, never clamped.
"""
import dataclasses
import enum
import math
import numpy as np
import statsmodels.api as sm
from qgrad.exceptions import BoundsError, InadmissibleStepError

INTEGER_GUARD = 1e-9


class FormulaId(enum.Enum):
    UNCONSTRAINED_GRAD_NORM = "unconstrained_grad_norm"
    ORTHANT_SIGN_L_ALPHA = "orthant_sign_l_alpha"
    OPTIMAL_RATE = "optimal_rate"
    GAP_BOUND_RATE = "gap_bound_rate"
    ACCURACY_BUDGET = "accuracy_budget"
    STRONGLY_CONVEX = "strongly_convex"


@dataclasses.dataclass(frozen=True)
class ProblemConstants:
    """
    Constants a bound may need; absent values are None

    Attributes:
    lipschitz : float
        Lipschitz constant L of the gradient
    grad_bound : float
        gradient bound B
    mu : float
        strong convexity modulus
    gap : float
        f(x0) - f*
    gap_bound : float
        any K >= f(x0) - f*, used when gap is absent
    grad0_norm : float
        |grad f(x0)|
    dims : int
        dimension N
    cos_theta : float
        covering cosine of the direction set, in (0, 1]
    alpha : float
        parameter of the optimality measure L_alpha
    epsilon : float
        target accuracy
    """
    lipschitz: float
    grad_bound: object = None
    mu: object = None
    gap: object = None
    gap_bound: object = None
    grad0_norm: object = None
    dims: int = 1
    cos_theta: float = 1.0
    alpha: float = 1.0
    epsilon: object = None

    def __post_init__(self):
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if value is None:
                continue
            if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
                raise BoundsError(f"Error: {field.name} must be a positive finite number, got {value!r}")
        if self.cos_theta > 1.0:
            raise BoundsError(f"Error: cos_theta must not exceed 1, got {self.cos_theta!r}")

    def require(self, *names):
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise BoundsError(f"Error: missing constants: {', '.join(missing)}")

    @property
    def effective_gap(self):
        """f(x0) - f* when known, else the bound K, else None."""
        return self.gap if self.gap is not None else self.gap_bound

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class BoundReport:
    """
    Evaluated bound together with the inputs that produced it

    Attributes:
    formula : FormulaId
    t_upper, t_lower : int or None
        iteration bounds
    gamma : float or None
        step size the bounds were evaluated at
    gamma_star : float or None
        best step size for the formula
    gamma_range : tuple or None
        open interval (low, high) of admissible step sizes
    epsilon_star, kappa_star : float or None
        accuracy and descent-slack of rate plans
    gap_bound : float or None
        bound on f - f* at the reached gradient level (strongly convex)
    bits_upper : int or None
        t_upper times bits per iteration
    inputs : ProblemConstants
    """
    formula: FormulaId
    inputs: ProblemConstants
    t_upper: object = None
    t_lower: object = None
    gamma: object = None
    gamma_star: object = None
    gamma_range: object = None
    epsilon_star: object = None
    kappa_star: object = None
    gap_bound: object = None
    bits_upper: object = None

    def to_dict(self):
        data = {"formula": self.formula.value}
        for field in dataclasses.fields(self):
            if field.name in ("formula", "inputs"):
                continue
            value = getattr(self, field.name)
            data[field.name] = list(value) if isinstance(value, tuple) else value
        data["inputs"] = self.inputs.to_dict()
        return data

    def lines(self):
        """Aligned key=value lines of the present fields."""
        data = self.to_dict()
        data.pop("inputs")
        present = {key: value for key, value in data.items() if value is not None}
        width = max(len(key) for key in present)
        return [f"{key.ljust(width)} = {value}" for key, value in present.items()]


@dataclasses.dataclass(frozen=True)
class DescentMargins:
    """Guaranteed per-step decrease outside the target set; delta_bar is None without B."""
    delta: float
    delta_bar: object = None

    @property
    def delta_positive(self):
        return self.delta > 0.0

    @property
    def delta_bar_positive(self):
        return None if self.delta_bar is None else self.delta_bar > 0.0


def _ceil(value):
    nearest = round(value)
    if abs(value - nearest) <= INTEGER_GUARD * max(1.0, abs(value)):
        return int(nearest)
    return int(math.ceil(value))


def _floor(value):
    nearest = round(value)
    if abs(value - nearest) <= INTEGER_GUARD * max(1.0, abs(value)):
        return int(nearest)
    return int(math.floor(value))


def _check_gamma(gamma, interval, formula):
    if not interval[0] < gamma < interval[1]:
        raise InadmissibleStepError(gamma, interval, formula.value)


def _bits(t_upper, bits):
    if t_upper is None or bits is None:
        return None
    return int(t_upper) * int(bits)


def _orthant_scale(consts):
    return consts.alpha ** 2 * consts.grad_bound * consts.dims ** 1.5


def descent_margins(consts, gamma, need_bar=False):
    """
    Summary:
    Per-step decrease guaranteed outside the target set

    Parameters:
    consts : ProblemConstants
        needs lipschitz, cos_theta, epsilon; delta_bar also needs grad_bound
    gamma : float
        nonnegative step size
    need_bar : bool
        raise when grad_bound is missing instead of leaving delta_bar empty

    Return:
    margins : DescentMargins
        delta = (2 cos(theta) eps / L - gamma) (L/2) gamma for a direction set,
        delta_bar = (2 eps^2 / (L alpha^2 B N^1.5) - gamma) (L/2) gamma for the
        sign method on the orthant
    """
    if not gamma >= 0.0:
        raise BoundsError(f"Error: step size must be nonnegative, got {gamma!r}")
    consts.require("epsilon")
    lipschitz, epsilon = consts.lipschitz, consts.epsilon
    delta = (2.0 * consts.cos_theta * epsilon / lipschitz - gamma) * (lipschitz / 2.0) * gamma
    if consts.grad_bound is None:
        if need_bar:
            raise BoundsError("Error: missing constants: grad_bound (needed for delta_bar)")
        return DescentMargins(delta)
    delta_bar = (2.0 * epsilon ** 2 / (lipschitz * _orthant_scale(consts)) - gamma) * (lipschitz / 2.0) * gamma
    return DescentMargins(delta, delta_bar)


def type1_plan(consts, gamma=None, constrained=False, bits=None):
    """
    Summary:
    Iteration bounds for reaching a gradient-type accuracy epsilon

    Parameters:
    consts : ProblemConstants
        unconstrained: lipschitz, cos_theta, epsilon and gap (upper bound)
        and/or grad0_norm (lower bound); constrained: also grad_bound, alpha,
        dims; gap for t_upper
    gamma : float or None
        step size inside the admissible interval, gamma_star when None
    constrained : bool
        bound for the sign method with L_alpha on the orthant
    bits : int or None
        bits per iteration, to report bits_upper

    Return:
    report : BoundReport
    """
    consts.require("epsilon")
    lipschitz, epsilon = consts.lipschitz, consts.epsilon
    gap = consts.effective_gap
    if constrained:
        consts.require("grad_bound")
        formula = FormulaId.ORTHANT_SIGN_L_ALPHA
        scale = _orthant_scale(consts)
        interval = (0.0, 2.0 * epsilon ** 2 / (lipschitz * scale))
        gamma_star = epsilon ** 2 / (lipschitz * scale)
        if gamma is None:
            gamma = gamma_star
        _check_gamma(gamma, interval, formula)
        t_upper = None
        if gap is not None:
            t_upper = _ceil(2.0 * gap * scale / (gamma * (2.0 * epsilon ** 2 - lipschitz * gamma * scale)))
        return BoundReport(formula, consts, t_upper=t_upper, gamma=gamma, gamma_star=gamma_star,
                           gamma_range=interval, bits_upper=_bits(t_upper, bits))

    if gap is None and consts.grad0_norm is None:
        raise BoundsError("Error: missing constants: gap (upper bound) or grad0_norm (lower bound)")
    formula = FormulaId.UNCONSTRAINED_GRAD_NORM
    cos_theta = consts.cos_theta
    interval = (0.0, 2.0 * cos_theta * epsilon / lipschitz)
    gamma_star = cos_theta * epsilon / lipschitz
    if gamma is None:
        gamma = gamma_star
    _check_gamma(gamma, interval, formula)
    t_upper = None
    if gap is not None:
        t_upper = _ceil(2.0 * gap / (gamma * (2.0 * cos_theta * epsilon - lipschitz * gamma)))
    t_lower = None
    if consts.grad0_norm is not None:
        t_lower = max(0, _floor((consts.grad0_norm - epsilon) / (gamma * lipschitz)))
    return BoundReport(formula, consts, t_upper=t_upper, t_lower=t_lower, gamma=gamma,
                       gamma_star=gamma_star, gamma_range=interval, bits_upper=_bits(t_upper, bits))


def optimal_rate_plan(iterations, consts, bits=None):
    """
    Summary:
    Best accuracy guaranteed after a fixed number of iterations

    Parameters:
    iterations : int
        T >= 1
    consts : ProblemConstants
        lipschitz, cos_theta and gap; gap_bound K is used when gap is absent

    Return:
    report : BoundReport
        epsilon_star, gamma_star, kappa_star with
        kappa_star + gamma_star L / (2 cos(theta)) = epsilon_star
    """
    if int(iterations) != iterations or iterations < 1:
        raise BoundsError(f"Error: iteration count must be an integer >= 1, got {iterations!r}")
    lipschitz, cos_theta = consts.lipschitz, consts.cos_theta
    if consts.gap is not None:
        gap = consts.gap
        epsilon_star = math.sqrt(2.0 * lipschitz * gap) / (cos_theta * math.sqrt(iterations))
        gamma_star = math.sqrt(2.0 * gap / (lipschitz * iterations))
        kappa_star = math.sqrt(lipschitz * gap) / (cos_theta * math.sqrt(2.0 * iterations))
        formula = FormulaId.OPTIMAL_RATE
    elif consts.gap_bound is not None:
        bound = consts.gap_bound
        epsilon_star = math.sqrt(2.0 * lipschitz * bound) / (cos_theta * math.sqrt(iterations))
        gamma_star = 2.0 * bound / (lipschitz * iterations)
        kappa_star = epsilon_star - gamma_star * lipschitz / (2.0 * cos_theta)
        formula = FormulaId.GAP_BOUND_RATE
    else:
        raise BoundsError("Error: missing constants: gap or gap_bound")
    return BoundReport(formula, consts, t_upper=int(iterations), gamma=gamma_star, gamma_star=gamma_star,
                       epsilon_star=epsilon_star, kappa_star=kappa_star,
                       bits_upper=_bits(iterations, bits))


def budget_plan(consts, gamma, kappa, bits=None):
    """
    Summary:
    Accuracy reached and iterations needed for a step size and descent slack

    Parameters:
    consts : ProblemConstants
        lipschitz, cos_theta and gap (or gap_bound)
    gamma : float
        positive step size
    kappa : float
        positive slack; the guaranteed accuracy is kappa + gamma L / (2 cos(theta))

    Return:
    report : BoundReport
        epsilon_star and t_upper = ceil(gap / (cos(theta) gamma kappa))
    """
    gap = consts.effective_gap
    if gap is None:
        raise BoundsError("Error: missing constants: gap or gap_bound")
    if not gamma > 0.0:
        raise InadmissibleStepError(gamma, (0.0, math.inf), FormulaId.ACCURACY_BUDGET.value)
    if not kappa > 0.0:
        raise BoundsError(f"Error: kappa must be positive, got {kappa!r}")
    epsilon = kappa + gamma * consts.lipschitz / (2.0 * consts.cos_theta)
    t_upper = _ceil(gap / (consts.cos_theta * gamma * kappa))
    return BoundReport(FormulaId.ACCURACY_BUDGET, consts, t_upper=t_upper, gamma=gamma,
                       epsilon_star=epsilon, kappa_star=kappa, bits_upper=_bits(t_upper, bits))


def strongly_convex_plan(consts, gamma=None, bits=None):
    """
    Summary:
    Bounds for strongly convex objectives

    Parameters:
    consts : ProblemConstants
        lipschitz, mu, cos_theta, epsilon; gap for t_upper
    gamma : float or None
        step size in (0, gamma_bar)

    Return:
    report : BoundReport
        gamma_range = (0, gamma_bar) with
        gamma_bar = min(2 cos(theta) sqrt(mu eps) / L, sqrt(eps / L)),
        t_upper for the step size, and gap_bound = eps^2 / (2 mu)
    """
    consts.require("mu", "epsilon")
    lipschitz, mu, epsilon, cos_theta = consts.lipschitz, consts.mu, consts.epsilon, consts.cos_theta
    reach = cos_theta * math.sqrt(mu * epsilon)
    gamma_bar = min(2.0 * reach / lipschitz, math.sqrt(epsilon / lipschitz))
    interval = (0.0, gamma_bar)
    # the unconstrained minimiser of the bound when admissible, else the middle of the range
    gamma_star = reach / lipschitz if reach / lipschitz < gamma_bar else gamma_bar / 2.0
    if gamma is not None:
        _check_gamma(gamma, interval, FormulaId.STRONGLY_CONVEX)
    t_upper = None
    gap = consts.effective_gap
    if gamma is not None and gap is not None:
        t_upper = _ceil(2.0 * gap / (gamma * (2.0 * reach - lipschitz * gamma)))
    return BoundReport(FormulaId.STRONGLY_CONVEX, consts, t_upper=t_upper, gamma=gamma,
                       gamma_star=gamma_star, gamma_range=interval,
                       gap_bound=epsilon ** 2 / (2.0 * mu), bits_upper=_bits(t_upper, bits))


@dataclasses.dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


def fit_rate_exponent(grad_norms):
    """
    Summary:
    Fit |grad f|_min(t) ~ C (t + 1)^slope by least squares in log-log scale

    Parameters:
    grad_norms : array_like or RunTrace
        gradient norms per iteration

    Return:
    fit : RateFit
        slope near -0.5 matches the worst-case 1/sqrt(T) rate
    """
    values = np.asarray(getattr(grad_norms, "grad_norm", grad_norms), dtype=float)
    best = np.minimum.accumulate(values)
    steps = np.arange(1, values.size + 1, dtype=float)
    keep = best > 0.0
    if np.count_nonzero(keep) < 3:
        raise BoundsError("Error: rate fit needs at least three positive gradient norms")
    exog = sm.add_constant(np.log(steps[keep]))
    model = sm.OLS(np.log(best[keep]), exog).fit()
    return RateFit(float(model.params[1]), float(model.params[0]), float(model.rsquared))
