import dataclasses
import numpy as np
import qgrad.constants as constants
from qgrad.exceptions import ProblemError
from qgrad.optimizer.domain import Domain
from qgrad.problems.oracle import ObjectiveOracle
from qgrad.random_streams import make_rng

BALANCE_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class FlowNetwork:
    """
    Optimal network flow instance with quadratic edge costs

    Attributes:
    incidence : numpy.ndarray
        N x E matrix, +1 where edge e leaves node n, -1 where it enters
    injections : numpy.ndarray
        node injections c with sum c = 0
    rho : numpy.ndarray
        positive edge cost curvatures, C_e(v) = rho_e v^2 / 2
    reference : int
        node whose dual variable is pinned to 0
    seed : int or None
    """
    incidence: np.ndarray
    injections: np.ndarray
    rho: np.ndarray
    reference: int = constants.FLOW_REFERENCE_NODE
    seed: object = None

    def __post_init__(self):
        incidence = np.asarray(self.incidence, dtype=float)
        if incidence.ndim != 2 or incidence.shape[0] < 2 or incidence.shape[1] < 1:
            raise ProblemError("Error: incidence matrix needs at least two nodes and one edge")
        nodes, edges = incidence.shape
        if not (np.all(np.sum(incidence == 1.0, axis=0) == 1) and np.all(np.sum(incidence == -1.0, axis=0) == 1)
                and np.all(np.sum(incidence != 0.0, axis=0) == 2)):
            raise ProblemError("Error: each incidence column needs exactly one +1 and one -1")
        if np.asarray(self.injections).shape != (nodes,) or np.asarray(self.rho).shape != (edges,):
            raise ProblemError("Error: injections and rho must match the incidence matrix")
        if abs(float(np.sum(self.injections))) > BALANCE_TOLERANCE * max(1.0, float(np.abs(self.injections).sum())):
            raise ProblemError(f"Error: injections must sum to 0, got {float(np.sum(self.injections))!r}")
        if np.any(np.asarray(self.rho) <= 0.0):
            raise ProblemError("Error: edge curvatures rho must be positive")
        if not -nodes <= self.reference < nodes:
            raise ProblemError(f"Error: reference node {self.reference} out of range")

    @property
    def nodes(self):
        return self.incidence.shape[0]

    @property
    def edges(self):
        return self.incidence.shape[1]

    def to_dict(self):
        return {
            "family": "flow",
            "seed": self.seed,
            "incidence": np.asarray(self.incidence).astype(int).tolist(),
            "injections": np.asarray(self.injections).tolist(),
            "rho": np.asarray(self.rho).tolist(),
            "reference": int(self.reference),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            np.array(data["incidence"], dtype=float),
            np.array(data["injections"], dtype=float),
            np.array(data["rho"], dtype=float),
            int(data.get("reference", constants.FLOW_REFERENCE_NODE)),
            data.get("seed"),
        )


def generate_flow(seed, nodes=constants.FLOW_NODES, extra_edges=constants.FLOW_EXTRA_EDGES,
                  rho_range=constants.FLOW_RHO_RANGE):
    """
    Summary:
    Random connected network: a random spanning tree plus extra directed edges

    Parameters:
    seed : int
    nodes : int
        at least 2
    extra_edges : int
        edges beyond the tree, drawn between distinct node pairs
    rho_range : tuple
        curvature range of the edge costs

    Return:
    network : FlowNetwork
        balanced injections drawn from a standard normal
    """
    if nodes < 2:
        raise ProblemError(f"Error: a flow network needs at least two nodes, got {nodes}")
    rng = make_rng(seed, constants.STREAM_FLOW)
    pairs = []
    for node in range(1, nodes):
        parent = int(rng.integers(0, node))
        pairs.append((node, parent) if rng.random() < 0.5 else (parent, node))
    for _ in range(extra_edges):
        tail, head = rng.choice(nodes, size=2, replace=False)
        pairs.append((int(tail), int(head)))
    incidence = np.zeros((nodes, len(pairs)))
    for edge, (tail, head) in enumerate(pairs):
        incidence[tail, edge] = 1.0
        incidence[head, edge] = -1.0
    injections = rng.standard_normal(nodes)
    injections[-1] = -np.sum(injections[:-1])
    rho = rng.uniform(rho_range[0], rho_range[1], len(pairs))
    return FlowNetwork(incidence, injections, rho, constants.FLOW_REFERENCE_NODE, seed)


class NetflowDualOracle(ObjectiveOracle):
    """
    A class to represent the dual of an optimal network flow problem
    ...
    The dual variable of the reference node is pinned to 0, so the oracle
    works on the N - 1 remaining nodes where the dual is a strongly convex
    quadratic with a unique minimiser.

    Attributes:
    network : FlowNetwork
    free_nodes : numpy.ndarray
        indices of the unpinned nodes
    lipschitz, mu : float
        extreme eigenvalues of the reduced A diag(1/rho) A^T

    Methods:
    lift(x)
        node prices with the reference node set to 0
    flows(x)
        closed-form edge flows v(x) = -(A^T x) / rho
    lifted_grad(x)
        c - A v(x) over all nodes, summing to 0
    primal_values(x)
        primal cost and conservation residual, the per-iteration trace columns
    primal_summary(x)
        flows, cost and conservation residual at x
    """
    family = "flow"

    def __init__(self, network):
        super().__init__(network.nodes - 1, Domain.unconstrained())
        self.network = network
        self.incidence = np.asarray(network.incidence, dtype=float)
        self.injections = np.asarray(network.injections, dtype=float)
        self.rho = np.asarray(network.rho, dtype=float)
        reference = network.reference % network.nodes
        self.free_nodes = np.array([node for node in range(network.nodes) if node != reference])
        reduced = self.incidence[self.free_nodes]
        hessian = reduced @ np.diag(1.0 / self.rho) @ reduced.T
        eigenvalues = np.linalg.eigvalsh(hessian)
        if eigenvalues[0] <= constants.ZERO_TOLERANCE:
            raise ProblemError("Error: flow network is not connected")
        self.lipschitz = float(eigenvalues[-1])
        self.mu = float(eigenvalues[0])
        self.x_star = -np.linalg.solve(hessian, self.injections[self.free_nodes])
        self.f_star = self.eval(self.x_star)
        self.sample_scale = 2.0 * (1.0 + float(np.max(np.abs(self.x_star))))

    def lift(self, x):
        full = np.zeros(self.network.nodes)
        full[self.free_nodes] = x
        return full

    def flows(self, x):
        x = self.check_point(x)
        return -(self.incidence.T @ self.lift(x)) / self.rho

    def lifted_grad(self, x):
        return self.injections - self.incidence @ self.flows(x)

    def value_and_grad(self, x):
        x = self.check_point(x)
        potential = self.incidence.T @ self.lift(x)
        value = float(np.sum(potential ** 2 / (2.0 * self.rho)) + x @ self.injections[self.free_nodes])
        return value, self.lifted_grad(x)[self.free_nodes]

    def primal_values(self, x):
        flows = self.flows(x)
        cost = float(np.sum(0.5 * self.rho * flows ** 2))
        return cost, float(np.linalg.norm(self.incidence @ flows - self.injections))

    def primal_summary(self, x):
        cost, residual = self.primal_values(x)
        return {
            "flows": self.flows(x).tolist(),
            "cost": cost,
            "conservation_residual": residual,
        }

    def to_dict(self):
        return self.network.to_dict()


def netflow_dual_oracle(network):
    """Dual oracle of a FlowNetwork in the reduced (reference-pinned) space."""
    return NetflowDualOracle(network)
