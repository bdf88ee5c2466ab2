"""
Task allocation by dual decomposition
...

K machines share N divisible tasks with demands c. Machine k does w_k >= 0
with sum(w_k) <= cap at cost sum_j a_kj w_kj^2. The task manager prices
tasks with x; machine k answers with the maximiser of
-C_k(w) - x^T w over its local set, and the dual gradient c - sum_k w_k is
the unfinished part of every task.
"""
import dataclasses
import itertools
import logging
import numpy as np
import qgrad.constants as constants
from qgrad.exceptions import ProblemError
from qgrad.optimizer.domain import Domain
from qgrad.problems.oracle import ObjectiveOracle, ReferenceSolution
from qgrad.random_streams import make_rng

logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True)
class TaskAllocation:
    """
    Attributes:
    coefficients : numpy.ndarray
        K x N cost coefficients a_kj, all >= mu > 0
    demand : numpy.ndarray
        task amounts c, length N
    cap : float
        per-machine bound on the total amount of work
    seed : int or None
    """
    coefficients: np.ndarray
    demand: np.ndarray
    cap: float
    seed: object = None

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=float))
        if coefficients.ndim != 2 or coefficients.size == 0:
            raise ProblemError("Error: coefficients must be a nonempty K x N array")
        if np.any(coefficients <= 0.0):
            raise ProblemError("Error: cost coefficients must be positive")
        if np.asarray(self.demand).shape != (coefficients.shape[1],):
            raise ProblemError(f"Error: demand must have length {coefficients.shape[1]}")
        if np.any(np.asarray(self.demand) < 0.0):
            raise ProblemError("Error: task demands must be nonnegative")
        if not self.cap > 0.0:
            raise ProblemError(f"Error: machine cap must be positive, got {self.cap!r}")
        if not coefficients.shape[0] * self.cap > float(np.sum(self.demand)):
            raise ProblemError("Error: total machine capacity must exceed the total demand")

    @property
    def machines(self):
        return self.coefficients.shape[0]

    @property
    def tasks(self):
        return self.coefficients.shape[1]

    def to_dict(self):
        return {
            "family": "tasks",
            "seed": self.seed,
            "coefficients": np.asarray(self.coefficients).tolist(),
            "demand": np.asarray(self.demand).tolist(),
            "cap": float(self.cap),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            np.array(data["coefficients"], dtype=float),
            np.array(data["demand"], dtype=float),
            float(data["cap"]),
            data.get("seed"),
        )


def generate_tasks(seed, machines=constants.TASK_MACHINES, tasks=constants.TASK_COUNT,
                   coef_range=constants.TASK_COEF_RANGE, demand=constants.TASK_DEMAND, cap=constants.TASK_CAP):
    """
    Summary:
    Random task allocation instance with coefficients uniform on coef_range

    Parameters:
    seed : int
    machines, tasks : int
        K and N
    coef_range : tuple
        bounds of the uniform cost coefficients
    demand : float or array_like
        amount of every task, or one value per task
    cap : float
        per-machine total work bound

    Return:
    problem : TaskAllocation
    """
    if machines < 1 or tasks < 1:
        raise ProblemError(f"Error: need at least one machine and one task, got K={machines}, N={tasks}")
    if not 0.0 < coef_range[0] <= coef_range[1]:
        raise ProblemError(f"Error: coefficient range must be positive and ordered, got {coef_range!r}")
    rng = make_rng(seed, constants.STREAM_TASKS)
    coefficients = rng.uniform(coef_range[0], coef_range[1], (machines, tasks))
    demand = np.broadcast_to(np.asarray(demand, dtype=float), (tasks,)).copy()
    return TaskAllocation(coefficients, demand, float(cap), seed)


def _cases(tasks):
    """(free set mask, cap active) for every KKT case of one machine."""
    cases = []
    for mask in itertools.product((False, True), repeat=tasks):
        free = np.array(mask)
        cases.append((free, False))
        if free.any():
            cases.append((free, True))
    return cases


class TaskDualOracle(ObjectiveOracle):
    """
    A class to represent the dual of a task allocation problem
    ...
    Attributes:
    problem : TaskAllocation
    coefficient_min : float
        smallest cost coefficient mu
    lipschitz : float
        K / mu, an upper bound on the Lipschitz constant of the dual gradient

    Methods:
    allocation(x)
        K x N matrix of machine answers w_k(x)
    primal_values(x)
        primal cost and demand residual, the per-iteration trace columns
    primal_summary(x)
        allocation, primal cost and demand residual at x
    """
    family = "tasks"

    def __init__(self, problem):
        super().__init__(problem.tasks, Domain.unconstrained())
        self.problem = problem
        self.coefficients = np.asarray(problem.coefficients, dtype=float)
        self.demand = np.asarray(problem.demand, dtype=float)
        self.cap = float(problem.cap)
        self.coefficient_min = float(self.coefficients.min())
        self.lipschitz = problem.machines / self.coefficient_min
        self.grad_bound = float(np.linalg.norm(self.demand) + problem.machines * self.cap)
        self.sample_scale = 10.0
        self._inverse = 1.0 / (2.0 * self.coefficients)
        self._cases = _cases(problem.tasks)

    def _solve(self, x):
        """Exact machine subproblems by enumeration of the active sets."""
        machines = self.coefficients.shape[0]
        best = np.zeros_like(self.coefficients)
        best_cost = np.zeros(machines)
        for index, (free, cap_active) in enumerate(self._cases):
            scaled = x * self._inverse
            if cap_active:
                weight = np.sum(self._inverse[:, free], axis=1)
                shift = -(self.cap + np.sum(scaled[:, free], axis=1)) / weight
                candidate = np.where(free, -(x[None, :] + shift[:, None]) * self._inverse, 0.0)
            else:
                candidate = np.where(free, -scaled, 0.0)
            feasible = np.all(candidate >= -FEASIBILITY_TOLERANCE, axis=1)
            feasible &= candidate.sum(axis=1) <= self.cap + FEASIBILITY_TOLERANCE
            candidate = np.maximum(candidate, 0.0)
            cost = np.sum(self.coefficients * candidate ** 2, axis=1) + candidate @ x
            better = feasible & (cost < best_cost - FEASIBILITY_TOLERANCE * (1.0 + np.abs(best_cost)))
            best[better] = candidate[better]
            best_cost[better] = cost[better]
        return best, best_cost

    def allocation(self, x):
        x = self.check_point(x)
        return self._solve(x)[0]

    def value_and_grad(self, x):
        x = self.check_point(x)
        allocation, cost = self._solve(x)
        # max of -C_k(w) - x^T w is minus the minimised cost
        value = float(-np.sum(cost) + x @ self.demand)
        return value, self.demand - allocation.sum(axis=0)

    def active_signature(self, x):
        allocation = self.allocation(x)
        tolerance = constants.KINK_CLASSIFY_TOLERANCE
        zero = allocation <= tolerance
        full = allocation.sum(axis=1) >= self.cap - tolerance
        return tuple(zero.ravel().tolist()) + tuple(full.tolist())

    def primal_values(self, x):
        allocation = self.allocation(x)
        cost = float(np.sum(self.coefficients * allocation ** 2))
        return cost, float(np.linalg.norm(allocation.sum(axis=0) - self.demand))

    def primal_summary(self, x):
        cost, residual = self.primal_values(x)
        return {
            "allocation": self.allocation(x).tolist(),
            "cost": cost,
            "demand_residual": residual,
        }

    def reference_solution(self, x0=None, max_iter=20000):
        """L-BFGS-B followed by Newton steps on the piecewise-affine gradient."""
        solution = super().reference_solution(x0, max_iter)
        x = solution.x
        _, gradient = self.value_and_grad(x)
        step = 1e-7
        for _ in range(20):
            if np.linalg.norm(gradient) <= 1e-13:
                break
            jacobian = np.empty((self.dims, self.dims))
            for axis in range(self.dims):
                shift = np.zeros(self.dims)
                shift[axis] = step
                jacobian[:, axis] = (self.grad(x + shift) - self.grad(x - shift)) / (2.0 * step)
            try:
                candidate = x - np.linalg.solve(jacobian, gradient)
            except np.linalg.LinAlgError:
                break
            candidate_gradient = self.grad(candidate)
            if np.linalg.norm(candidate_gradient) >= np.linalg.norm(gradient):
                break
            x, gradient = candidate, candidate_gradient
        value = self.eval(x)
        return ReferenceSolution(x, value, float(np.linalg.norm(gradient)))

    def to_dict(self):
        return self.problem.to_dict()


def task_dual_oracle(problem):
    """Dual oracle of a TaskAllocation, unconstrained in the task prices."""
    return TaskDualOracle(problem)
