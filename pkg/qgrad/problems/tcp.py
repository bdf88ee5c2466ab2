"""
TCP flow control by dual decomposition
...

Sources s send at rates q_s in [m_s, M_s] with utility u_s log(1 + q_s) over
routes of links with capacities c. Links price congestion with dual
variables x >= 0; each source answers the sum of prices on its route with a
closed-form rate, and the dual gradient is the capacity slack c - A q(x).
"""
import dataclasses
import logging
import numpy as np
import qgrad.constants as constants
from qgrad.exceptions import ProblemError
from qgrad.optimizer.domain import Domain
from qgrad.problems.oracle import ObjectiveOracle
from qgrad.random_streams import make_rng

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TcpNetwork:
    """
    Routing and utilities of a flow control instance

    Attributes:
    routing : numpy.ndarray
        N x S 0/1 matrix, routing[l, s] = 1 when link l is on the route of s
    capacity : numpy.ndarray
        positive link capacities c, length N
    utility : numpy.ndarray
        utility scales u_s, length S
    rate_lower, rate_upper : numpy.ndarray
        rate bounds m_s <= M_s, with m_s > -1
    seed : int or None
        seed the instance was generated from
    """
    routing: np.ndarray
    capacity: np.ndarray
    utility: np.ndarray
    rate_lower: np.ndarray
    rate_upper: np.ndarray
    seed: object = None

    def __post_init__(self):
        routing = np.asarray(self.routing)
        if routing.ndim != 2 or routing.size == 0:
            raise ProblemError("Error: routing matrix must be a nonempty 2-d array")
        links, sources = routing.shape
        if not np.all((routing == 0) | (routing == 1)):
            raise ProblemError("Error: routing matrix entries must be 0 or 1")
        if np.any(routing.sum(axis=0) == 0):
            raise ProblemError("Error: every source must use at least one link")
        if np.any(routing.sum(axis=1) == 0):
            raise ProblemError("Error: every link must serve at least one source")
        for name, size in (("capacity", links), ("utility", sources), ("rate_lower", sources), ("rate_upper", sources)):
            if np.asarray(getattr(self, name)).shape != (size,):
                raise ProblemError(f"Error: {name} must have length {size}")
        if np.any(np.asarray(self.capacity) <= 0.0):
            raise ProblemError("Error: link capacities must be positive")
        if np.any(np.asarray(self.utility) <= 0.0):
            raise ProblemError("Error: utility scales must be positive")
        if np.any(np.asarray(self.rate_lower) <= -1.0) or np.any(np.asarray(self.rate_lower) > np.asarray(self.rate_upper)):
            raise ProblemError("Error: rate bounds need -1 < m_s <= M_s")

    @property
    def links(self):
        return self.routing.shape[0]

    @property
    def sources(self):
        return self.routing.shape[1]

    def to_dict(self):
        return {
            "family": "tcp",
            "seed": self.seed,
            "routing": np.asarray(self.routing).astype(int).tolist(),
            "capacity": np.asarray(self.capacity).tolist(),
            "utility": np.asarray(self.utility).tolist(),
            "rate_lower": np.asarray(self.rate_lower).tolist(),
            "rate_upper": np.asarray(self.rate_upper).tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            np.array(data["routing"], dtype=float),
            np.array(data["capacity"], dtype=float),
            np.array(data["utility"], dtype=float),
            np.array(data["rate_lower"], dtype=float),
            np.array(data["rate_upper"], dtype=float),
            data.get("seed"),
        )


def generate_tcp(seed, sources=constants.TCP_SOURCES, links=constants.TCP_LINKS, density=constants.TCP_DENSITY,
                 utility_scale=constants.TCP_UTILITY_SCALE, capacity=constants.TCP_CAPACITY,
                 bounds=constants.TCP_RATE_BOUNDS):
    """
    Summary:
    Random flow control network, each routing entry 1 with probability density

    Parameters:
    seed : int
        instance seed
    sources, links : int
        S and N, at least 1
    density : float
        in (0, 1]
    utility_scale : float
        u in U(q) = u log(1 + q), shared by every source
    capacity : float
        capacity of every link
    bounds : tuple
        rate bounds (m, M) of every source

    Return:
    network : TcpNetwork
        empty routing rows and columns are redrawn until none remain
    """
    if sources < 1 or links < 1:
        raise ProblemError(f"Error: need at least one source and one link, got S={sources}, N={links}")
    if not 0.0 < density <= 1.0:
        raise ProblemError(f"Error: density must lie in (0, 1], got {density!r}")
    rng = make_rng(seed, constants.STREAM_TCP)
    routing = (rng.random((links, sources)) < density).astype(float)
    for _ in range(constants.TCP_RESAMPLE_LIMIT):
        empty_links = np.flatnonzero(routing.sum(axis=1) == 0)
        empty_sources = np.flatnonzero(routing.sum(axis=0) == 0)
        if empty_links.size == 0 and empty_sources.size == 0:
            break
        if empty_links.size:
            routing[empty_links] = rng.random((empty_links.size, sources)) < density
        if empty_sources.size:
            routing[:, empty_sources] = rng.random((links, empty_sources.size)) < density
    else:
        raise ProblemError("Error: could not draw a routing matrix without empty rows or columns")
    lower, upper = bounds
    return TcpNetwork(
        routing,
        np.full(links, float(capacity)),
        np.full(sources, float(utility_scale)),
        np.full(sources, float(lower)),
        np.full(sources, float(upper)),
        seed,
    )


class TcpDualOracle(ObjectiveOracle):
    """
    A class to represent the dual of a flow control network
    ...
    Attributes:
    network : TcpNetwork
    utility_concavity : float
        strong concavity of the utilities on the rate box, min u/(1+M)^2
    max_path_length : int
        most links on one route
    max_link_degree : int
        most sources on one link
    lipschitz : float
        utility_concavity * max_path_length * max_link_degree
    lipschitz_dual_bound : float
        max_path_length * max_link_degree / utility_concavity
    grad_bound : float
        |c| + |A max(|m|, |M|)|

    Methods:
    rates(x)
        closed-form source rates q(x)
    primal_values(x)
        utility and capacity violation, the per-iteration trace columns
    primal_summary(x)
        rates, utility and capacity violation at x
    """
    family = "tcp"

    def __init__(self, network):
        super().__init__(network.links, Domain.orthant())
        self.network = network
        self.routing = np.asarray(network.routing, dtype=float)
        self.capacity = np.asarray(network.capacity, dtype=float)
        self.utility = np.asarray(network.utility, dtype=float)
        self.rate_lower = np.asarray(network.rate_lower, dtype=float)
        self.rate_upper = np.asarray(network.rate_upper, dtype=float)
        self.utility_concavity = float(np.min(self.utility / (1.0 + self.rate_upper) ** 2))
        self.max_path_length = int(self.routing.sum(axis=0).max())
        self.max_link_degree = int(self.routing.sum(axis=1).max())
        self.lipschitz = self.utility_concavity * self.max_path_length * self.max_link_degree
        self.lipschitz_dual_bound = self.max_path_length * self.max_link_degree / self.utility_concavity
        reach = np.maximum(np.abs(self.rate_lower), np.abs(self.rate_upper))
        self.grad_bound = float(np.linalg.norm(self.capacity) + np.linalg.norm(self.routing @ reach))
        mean_path = float(self.routing.sum(axis=0).mean())
        self.sample_scale = 3.0 * float(np.median(self.utility / (1.0 + self.rate_upper))) / mean_path

    def _unclamped(self, prices):
        positive = prices > constants.ZERO_TOLERANCE
        safe = np.where(positive, prices, 1.0)
        return np.where(positive, self.utility / safe - 1.0, np.inf)

    def rates(self, x):
        """q_s = clamp(u_s / lambda_s - 1, m_s, M_s), with q_s = M_s for a price-free route."""
        x = self.check_point(x)
        prices = self.routing.T @ np.maximum(x, 0.0)
        return np.clip(self._unclamped(prices), self.rate_lower, self.rate_upper)

    def value_and_grad(self, x):
        x = self.check_point(x)
        rates = self.rates(x)
        load = self.routing @ rates
        value = float(np.sum(self.utility * np.log1p(rates)) - x @ (load - self.capacity))
        return value, self.capacity - load

    def active_signature(self, x):
        prices = self.routing.T @ np.maximum(np.asarray(x, dtype=float), 0.0)
        raw = self._unclamped(prices)
        tolerance = constants.KINK_CLASSIFY_TOLERANCE
        signature = np.where(raw <= self.rate_lower + tolerance, -1, np.where(raw >= self.rate_upper - tolerance, 1, 0))
        return tuple(signature.tolist())

    def primal_values(self, x):
        """Total utility and capacity violation of the rates answered at x."""
        rates = self.rates(x)
        violation = np.maximum(self.routing @ rates - self.capacity, 0.0)
        return float(np.sum(self.utility * np.log1p(rates))), float(np.linalg.norm(violation))

    def primal_summary(self, x):
        utility, violation = self.primal_values(x)
        return {
            "rates": self.rates(x).tolist(),
            "utility": utility,
            "capacity_violation": violation,
        }

    def to_dict(self):
        return self.network.to_dict()


def tcp_dual_oracle(network):
    """Dual oracle of a TcpNetwork, on the nonnegative orthant."""
    return TcpDualOracle(network)
