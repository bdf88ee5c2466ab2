"""
Covering analysis of quantization sets
...

The covering cosine of D is min over unit g of max over d in D of <g, d>.
A set is a proper quantization exactly when this value is positive, which is
also when D positively spans R^N. The two facts are computed independently:
covering_cosine searches the sphere, is_proper_quantization solves linear
programs.
"""
import dataclasses
import enum
import logging
import math
import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull, QhullError
import qgrad.constants as constants
from qgrad.exceptions import QuantizationError
from qgrad.quantization.directions import Direction, SetKind
from qgrad.random_streams import make_rng

logger = logging.getLogger(__name__)


class CoverMethod(enum.Enum):
    ANALYTIC = "analytic"
    EXACT_2D = "exact_2d"
    GRID_MULTISTART = "grid_multistart"
    LINEAR_PROGRAM = "linear_program"


@dataclasses.dataclass(frozen=True)
class CoverAnalysis:
    """
    Result of covering_cosine

    Attributes:
    cos_star : float
        min over the sphere of the best alignment with D, in [-1, 1]
    theta_star : float or None
        arccos(cos_star) in radians, present iff the set is proper
    witness : Direction
        a unit vector achieving cos_star
    proper : bool
        cos_star > 0 (up to PROPER_TOLERANCE)
    method : CoverMethod
        how cos_star was obtained
    """
    cos_star: float
    theta_star: object
    witness: Direction
    proper: bool
    method: CoverMethod

    @property
    def angle_degrees(self):
        if self.theta_star is None:
            return None
        return math.degrees(self.theta_star)


@dataclasses.dataclass(frozen=True)
class ProperCertificate:
    """
    Result of is_proper_quantization

    Attributes:
    proper : bool
        D positively spans R^N
    margin : float
        largest s with some convex weights lambda >= s and sum lambda_i d_i = 0;
        0.0 when the origin is outside the convex hull
    witness : Direction or None
        unit a with <a, d> <= 0 for every d, given when proper is False
    method : CoverMethod
        always LINEAR_PROGRAM
    """
    proper: bool
    margin: float
    witness: object
    method: CoverMethod = CoverMethod.LINEAR_PROGRAM

    def __bool__(self):
        return self.proper


def _require_nonempty(quantization_set):
    if quantization_set.size < 1:
        raise QuantizationError("Error: covering analysis needs a nonempty set")


def _support(matrix, direction):
    return float(np.max(matrix @ direction))


def _analysis(cos_star, witness, method):
    cos_star = float(min(1.0, max(-1.0, cos_star)))
    proper = cos_star > constants.PROPER_TOLERANCE
    theta_star = math.acos(cos_star) if proper else None
    return CoverAnalysis(cos_star, theta_star, Direction(witness), proper, method)


def _exact_low_dimension(matrix):
    dims = matrix.shape[1]
    if dims == 1:
        best = None
        for candidate in (1.0, -1.0):
            value = _support(matrix, np.array([candidate]))
            if best is None or value < best[0]:
                best = (value, np.array([candidate]))
        return best
    angles = np.sort(np.mod(np.arctan2(matrix[:, 1], matrix[:, 0]), 2.0 * math.pi))
    gaps = np.diff(np.append(angles, angles[0] + 2.0 * math.pi))
    index = int(np.argmax(gaps))
    largest = float(gaps[index])
    middle = angles[index] + largest / 2.0
    return math.cos(largest / 2.0), np.array([math.cos(middle), math.sin(middle)])


def _separating_direction(matrix):
    """Unit a with D a <= 0, or None when D positively spans R^N."""
    count, dims = matrix.shape
    result = linprog(
        matrix.sum(axis=0),
        A_ub=matrix,
        b_ub=np.zeros(count),
        bounds=[(-1.0, 1.0)] * dims,
        method="highs",
    )
    if result.status == 0 and result.fun < -constants.PROPER_TOLERANCE:
        direction = np.asarray(result.x, dtype=float)
        return direction / np.linalg.norm(direction)
    _, singular, vt = np.linalg.svd(matrix)
    rank = int(np.sum(singular > constants.PROPER_TOLERANCE * max(1.0, singular[0])))
    if rank < dims:
        direction = vt[-1] / np.linalg.norm(vt[-1])
        if np.max(matrix @ direction) <= constants.PROPER_TOLERANCE:
            return direction
    return None


def _spanning_margin(matrix):
    count, dims = matrix.shape
    objective = np.zeros(count + 1)
    objective[-1] = -1.0
    a_eq = np.zeros((dims + 1, count + 1))
    a_eq[:dims, :count] = matrix.T
    a_eq[dims, :count] = 1.0
    b_eq = np.zeros(dims + 1)
    b_eq[dims] = 1.0
    a_ub = np.hstack([-np.eye(count), np.ones((count, 1))])
    result = linprog(
        objective,
        A_ub=a_ub,
        b_ub=np.zeros(count),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0.0, None)] * count + [(None, 1.0)],
        method="highs",
    )
    if result.status == 2:
        return 0.0
    if result.status != 0:
        raise QuantizationError(f"Error: spanning linear program failed: {result.message}")
    return max(0.0, float(-result.fun))


def _refine_epigraph(matrix, start):
    """Local minimax on the sphere: min t s.t. D g <= t, |g|^2 = 1."""
    count, dims = matrix.shape
    jac_ineq = np.hstack([-matrix, np.ones((count, 1))])
    cost_grad = np.zeros(dims + 1)
    cost_grad[-1] = 1.0
    constraints = [
        {"type": "ineq", "fun": lambda z: z[-1] - matrix @ z[:-1], "jac": lambda z: jac_ineq},
        {"type": "eq", "fun": lambda z: z[:-1] @ z[:-1] - 1.0, "jac": lambda z: np.append(2.0 * z[:-1], 0.0)},
    ]
    result = minimize(
        lambda z: z[-1],
        np.append(start, _support(matrix, start)),
        jac=lambda z: cost_grad,
        method="SLSQP",
        constraints=constraints,
        options={"ftol": 1e-15, "maxiter": 500},
    )
    direction = np.asarray(result.x[:-1], dtype=float)
    norm = np.linalg.norm(direction)
    if not np.all(np.isfinite(direction)) or norm < constants.ZERO_TOLERANCE:
        return start
    return direction / norm


def _polish_active_set(matrix, direction):
    """Snap onto the point equidistant from the nearly active directions."""
    scores = matrix @ direction
    active = matrix[scores >= scores.max() - 1e-6]
    if active.shape[0] < matrix.shape[1]:
        return direction
    solution, _, rank, _ = np.linalg.lstsq(active, np.ones(active.shape[0]), rcond=None)
    norm = np.linalg.norm(solution)
    if rank < matrix.shape[1] or norm < constants.ZERO_TOLERANCE:
        return direction
    return solution / norm


def _grid_refine(matrix, direction):
    best, value = direction, _support(matrix, direction)
    dims = matrix.shape[1]
    for step in constants.GRID_REFINE_STEPS:
        improved = True
        while improved:
            improved = False
            for axis in range(dims):
                for sign in (1.0, -1.0):
                    candidate = best.copy()
                    candidate[axis] += sign * step
                    candidate /= np.linalg.norm(candidate)
                    candidate_value = _support(matrix, candidate)
                    if candidate_value < value - 1e-15:
                        best, value, improved = candidate, candidate_value, True
    return value, best


def _hull_normals(matrix):
    count, dims = matrix.shape
    if dims > constants.HULL_MAX_DIMS or count <= dims:
        return np.empty((0, dims))
    try:
        hull = ConvexHull(matrix)
    except (QhullError, ValueError) as err:
        logger.debug("convex hull unavailable: %s", err)
        return np.empty((0, dims))
    return np.unique(np.round(hull.equations[:, :-1], 10), axis=0)


def _grid_multistart(matrix, seed):
    count, dims = matrix.shape
    rng = make_rng(seed, constants.STREAM_COVER)
    starts = rng.standard_normal((constants.MULTISTART_STARTS, dims))
    pieces = [starts, -matrix, _hull_normals(matrix)]
    separating = _separating_direction(matrix)
    if separating is not None:
        pieces.append(separating[None, :])
    candidates = np.vstack(pieces)
    norms = np.linalg.norm(candidates, axis=1)
    candidates = candidates[norms > constants.ZERO_TOLERANCE] / norms[norms > constants.ZERO_TOLERANCE, None]
    values = np.max(candidates @ matrix.T, axis=1)
    order = np.argsort(values, kind="stable")[: constants.MULTISTART_REFINED]
    best_value, best = float(values[order[0]]), candidates[order[0]]
    for index in order:
        refined = _refine_epigraph(matrix, candidates[index])
        for candidate in (refined, _polish_active_set(matrix, refined)):
            value = _support(matrix, candidate)
            if value < best_value:
                best_value, best = value, candidate
    return _grid_refine(matrix, best)


def _numerical(quantization_set, seed):
    matrix = quantization_set.matrix
    if quantization_set.dims <= 2:
        cos_star, witness = _exact_low_dimension(matrix)
        return _analysis(cos_star, witness, CoverMethod.EXACT_2D)
    cos_star, witness = _grid_multistart(matrix, seed)
    return _analysis(cos_star, witness, CoverMethod.GRID_MULTISTART)


def _analytic_witness(quantization_set):
    dims = quantization_set.dims
    kind = quantization_set.kind
    if kind is SetKind.SIGN:
        witness = np.zeros(dims)
        witness[0] = 1.0
        return witness
    if kind is SetKind.NORMAL_BASIS:
        return np.ones(dims) / math.sqrt(dims)
    if kind is SetKind.CIRCULAR:
        angle = math.pi / quantization_set.count
        return np.array([math.cos(angle), math.sin(angle)])
    # facet of the minimal set opposite e_N
    witness = np.ones(dims)
    witness[-1] = -(dims - 1 + math.sqrt(dims))
    return witness / np.linalg.norm(witness)


def covering_cosine(quantization_set, numerical=False, seed=constants.DEFAULT_SEED):
    """
    Summary:
    Compute cos theta*(D), the covering cosine of a set

    Parameters:
    quantization_set : QuantizationSet
        the set D
    numerical : bool
        skip the closed form even when the family has one
    seed : int
        seed of the multistart used for N >= 3

    Return:
    analysis : CoverAnalysis
        Analytic for the standard families (cross-checked numerically when
        N <= 8), Exact2D for N <= 2, GridMultistart otherwise
    """
    _require_nonempty(quantization_set)
    closed_form = quantization_set.analytic_cos_theta
    if closed_form is None or numerical:
        return _numerical(quantization_set, seed)
    if quantization_set.enumerated and quantization_set.dims <= constants.COVER_CROSSCHECK_MAX_DIMS:
        check = _numerical(quantization_set, seed)
        if abs(check.cos_star - closed_form) > constants.COVER_TOLERANCE:
            logger.warning(
                "closed-form covering cosine %.12g of %r disagrees with numerical %.12g",
                closed_form, quantization_set, check.cos_star,
            )
    return _analysis(closed_form, _analytic_witness(quantization_set), CoverMethod.ANALYTIC)


def is_proper_quantization(quantization_set):
    """
    Summary:
    Decide whether D positively spans R^N by linear programming

    Parameters:
    quantization_set : QuantizationSet
        the set D

    Return:
    certificate : ProperCertificate
        truthy iff D is a proper quantization; carries a separating witness
        otherwise. Sets with |D| <= N are never proper.
    """
    _require_nonempty(quantization_set)
    if not quantization_set.enumerated:
        # sign sets are proper in every dimension
        return ProperCertificate(True, 1.0 / quantization_set.size, None)
    matrix = quantization_set.matrix
    count, dims = matrix.shape
    margin = 0.0
    if count > dims and np.linalg.matrix_rank(matrix) == dims:
        margin = _spanning_margin(matrix)
    proper = margin > constants.PROPER_TOLERANCE
    witness = None
    if not proper:
        separating = _separating_direction(matrix)
        if separating is not None:
            witness = Direction(separating)
    logger.debug("%r proper=%s margin=%.3g", quantization_set, proper, margin)
    return ProperCertificate(proper, margin, witness)
