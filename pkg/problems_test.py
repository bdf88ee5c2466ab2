"""
Tests for objective oracles, dual decomposition problems and instance files
...

Requirement:
pytest module -> pip install pytest

To test:
> pytest problems_test.py

"""
import json
import numpy as np
import pytest
from qgrad.exceptions import DimensionError, DomainError, KinkProximityError, ParameterError, ProblemError
from qgrad.optimizer.domain import Domain
from qgrad.optimizer.engine import StoppingRule, run
from qgrad.optimizer.schedule import make_schedule
from qgrad.problems.instances import load_instance, oracle_from_dict, save_instance
from qgrad.problems.netflow import FlowNetwork, generate_flow, netflow_dual_oracle
from qgrad.problems.oracle import fd_gradient_check, quadratic_oracle, random_quadratic, scalar_benchmark_oracle
from qgrad.problems.tasks import TaskAllocation, generate_tasks, task_dual_oracle
from qgrad.problems.tcp import TcpNetwork, generate_tcp, tcp_dual_oracle
from qgrad.quantization.directions import construct_set
from qgrad.random_streams import make_rng

fd_points = 100
lipschitz_pairs = 10 ** 4
circular_counts = [4, 8, 16]


def single_link(sources=1):
    return TcpNetwork(np.ones((1, sources)), np.ones(1), np.full(sources, 1000.0), np.zeros(sources),
                      np.ones(sources))


def two_node_flow():
    return FlowNetwork(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]), np.ones(1))


def unit_tasks():
    return TaskAllocation(np.ones((1, 2)), np.ones(2), 3.0)


def family_oracles():
    return {
        "quadratic": random_quadratic(3, 4),
        "scalar_benchmark": scalar_benchmark_oracle(),
        "tcp": tcp_dual_oracle(generate_tcp(2, sources=10, links=20)),
        "flow": netflow_dual_oracle(generate_flow(2)),
        "tasks": task_dual_oracle(generate_tasks(2)),
    }


def test_quadratic_oracle():
    oracle = quadratic_oracle([1.0, 1.0])
    np.testing.assert_array_equal(oracle.grad([0.0, 0.0]), [-1.0, -1.0])
    assert oracle.eval([1.0, 1.0]) == 0.0 == oracle.f_star
    assert oracle.lipschitz == oracle.mu == 1.0
    assert oracle.grad_bound is None
    with pytest.raises(ProblemError):
        quadratic_oracle([1.0], scale=0.0)
    with pytest.raises(DimensionError):
        oracle.eval([1.0])


def test_quadratic_on_orthant_clamps_minimiser():
    oracle = quadratic_oracle([-1.0, 2.0], domain=Domain.orthant())
    np.testing.assert_array_equal(oracle.x_star, [0.0, 2.0])
    assert oracle.f_star == pytest.approx(0.5)
    with pytest.raises(DomainError):
        oracle.eval([-1.0, 0.0])


def test_scalar_benchmark_oracle():
    oracle = scalar_benchmark_oracle()
    assert oracle.eval([3.0]) == 1.0
    assert oracle.eval([1.5]) == pytest.approx(0.125)
    assert oracle.grad([1.5])[0] == pytest.approx(0.5)
    assert oracle.grad([0.5])[0] == pytest.approx(-0.5)
    assert oracle.grad([3.0])[0] == 0.0
    assert oracle.f_star == 0.0
    assert oracle.lipschitz == oracle.grad_bound == 1.0
    assert oracle.outer == "constant"


def test_scalar_benchmark_linear_outer_branch():
    oracle = scalar_benchmark_oracle(domain=Domain.unconstrained(), outer="linear")
    assert oracle.eval([3.0]) == pytest.approx(1.5)
    assert oracle.grad([3.0])[0] == 1.0
    assert oracle.eval([-2.0]) == pytest.approx(2.5)
    assert oracle.grad([-2.0])[0] == -1.0
    assert oracle.eval([2.0]) == pytest.approx(0.5)
    assert oracle.grad([1.5])[0] == pytest.approx(0.5)
    restored = oracle_from_dict(oracle.to_dict())
    assert restored.outer == "linear"
    assert restored.grad([3.0])[0] == 1.0
    with pytest.raises(ParameterError):
        scalar_benchmark_oracle(outer="quadratic")


def test_generate_tcp_is_deterministic():
    first, second = generate_tcp(1), generate_tcp(1)
    np.testing.assert_array_equal(first.routing, second.routing)
    assert first.routing.shape == (100, 20)
    assert abs(first.routing.sum() - 1000.0) <= 67.0
    assert not np.array_equal(first.routing, generate_tcp(2).routing)


def test_generate_tcp_full_density():
    network = generate_tcp(5, sources=3, links=4, density=1.0)
    np.testing.assert_array_equal(network.routing, np.ones((4, 3)))


@pytest.mark.parametrize("kwargs", [{"sources": 0}, {"links": 0}, {"density": 0.0}, {"density": 1.5}])
def test_generate_tcp_rejects_degenerate_sizes(kwargs):
    with pytest.raises(ProblemError):
        generate_tcp(1, **kwargs)


def test_tcp_network_rejects_unused_links():
    with pytest.raises(ProblemError):
        TcpNetwork(np.array([[1.0], [0.0]]), np.ones(2), np.ones(1), np.zeros(1), np.ones(1))


def test_tcp_single_link_rates():
    oracle = tcp_dual_oracle(single_link())
    assert oracle.rates([800.0])[0] == pytest.approx(0.25)
    assert oracle.rates([2000.0])[0] == 0.0
    assert oracle.rates([0.0])[0] == 1.0
    assert oracle.domain.kind.value == "orthant"


def test_tcp_gradient_is_capacity_slack():
    oracle = tcp_dual_oracle(single_link(2))
    np.testing.assert_allclose(oracle.grad([800.0]), [0.5])
    summary = oracle.primal_summary(np.array([800.0]))
    np.testing.assert_allclose(summary["rates"], [0.25, 0.25])
    assert summary["capacity_violation"] == 0.0


def test_tcp_gradient_bound():
    oracle = tcp_dual_oracle(generate_tcp(1))
    rng = make_rng(1, substream=30)
    for _ in range(lipschitz_pairs):
        x = rng.uniform(0.0, 2.0 * oracle.sample_scale, oracle.dims) * (rng.random(oracle.dims) < 0.8)
        assert np.linalg.norm(oracle.grad(x)) <= oracle.grad_bound


def test_tcp_lipschitz_constants():
    oracle = tcp_dual_oracle(generate_tcp(1))
    assert oracle.utility_concavity == pytest.approx(250.0)
    assert oracle.lipschitz == pytest.approx(250.0 * oracle.max_path_length * oracle.max_link_degree)
    assert oracle.lipschitz_dual_bound == pytest.approx(oracle.max_path_length * oracle.max_link_degree / 250.0)


def test_netflow_two_node_example():
    oracle = netflow_dual_oracle(two_node_flow())
    assert oracle.dims == 1
    assert oracle.grad([-1.0])[0] == pytest.approx(0.0)
    assert oracle.grad([0.5])[0] == pytest.approx(1.5)
    np.testing.assert_allclose(oracle.lifted_grad(np.zeros(1)), [1.0, -1.0])
    np.testing.assert_allclose(oracle.x_star, [-1.0])
    np.testing.assert_allclose(oracle.flows([-1.0]), [1.0])
    assert oracle.lipschitz == pytest.approx(1.0)


def test_netflow_lifted_gradient_sums_to_zero():
    oracle = netflow_dual_oracle(generate_flow(4, nodes=8, extra_edges=6))
    rng = make_rng(4, substream=31)
    for _ in range(20):
        assert abs(oracle.lifted_grad(oracle.sample_point(rng)).sum()) <= 1e-9


def test_netflow_conservation_at_optimum():
    for seed in range(5):
        oracle = netflow_dual_oracle(generate_flow(seed))
        assert oracle.primal_summary(oracle.x_star)["conservation_residual"] <= 1e-6
        solution = oracle.reference_solution()
        assert oracle.primal_summary(solution.x)["conservation_residual"] <= 1e-6


def test_flow_network_rejects_unbalanced_injections():
    with pytest.raises(ProblemError):
        FlowNetwork(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]), np.ones(1))
    with pytest.raises(ProblemError):
        FlowNetwork(np.array([[1.0], [1.0]]), np.array([1.0, -1.0]), np.ones(1))


@pytest.mark.parametrize("x, expected", [((0.0, 0.0), (0.0, 0.0)), ((-4.0, 0.0), (2.0, 0.0)),
                                         ((-8.0, -8.0), (1.5, 1.5)), ((3.0, -1.0), (0.0, 0.5))])
def test_task_machine_answers(x, expected):
    oracle = task_dual_oracle(unit_tasks())
    np.testing.assert_allclose(oracle.allocation(np.array(x)), [expected], atol=1e-12)


def test_task_gradient_is_unfinished_work():
    oracle = task_dual_oracle(unit_tasks())
    np.testing.assert_allclose(oracle.grad([-4.0, 0.0]), [-1.0, 1.0])
    assert oracle.lipschitz == 1.0
    assert oracle.dims == 2
    assert fd_gradient_check(oracle, [-4.0, 0.0], h=1e-6) <= 1e-5


def test_task_default_instance():
    problem = generate_tasks(1)
    assert problem.machines == 4
    assert problem.tasks == 2
    oracle = task_dual_oracle(problem)
    assert oracle.lipschitz == pytest.approx(4.0 / problem.coefficients.min())
    with pytest.raises(ProblemError):
        TaskAllocation(np.ones((1, 2)), np.full(2, 2.0), 3.0)


def grid_allocation(coefficients, x, cap):
    """Brute-force minimiser of a w1^2 + b w2^2 + x.w over the capped triangle on a 1e-3 grid."""
    steps = int(round(cap * 1000))
    j = np.arange(steps + 1)
    best_cost, best = np.inf, None
    for start in range(0, steps + 1, 500):
        i = np.arange(start, min(start + 500, steps + 1))[:, None]
        w1, w2 = i * 1e-3, j[None, :] * 1e-3
        cost = coefficients[0] * w1 ** 2 + coefficients[1] * w2 ** 2 + x[0] * w1 + x[1] * w2
        cost = np.where(i + j[None, :] <= steps, cost, np.inf)
        index = np.unravel_index(np.argmin(cost), cost.shape)
        if cost[index] < best_cost:
            best_cost = cost[index]
            best = np.array([float(w1[index[0], 0]), float(w2[0, index[1]])])
    return best


def test_task_solver_matches_grid_search():
    rng = make_rng(9, substream=32)
    for _ in range(30):
        coefficients = rng.uniform(1.0, 5.0, 2)
        x = rng.uniform(-15.0, 5.0, 2)
        oracle = task_dual_oracle(TaskAllocation(coefficients[None, :], np.full(2, 0.5), 3.0))
        exact = oracle.allocation(x)[0]
        assert np.all(exact >= 0.0) and exact.sum() <= 3.0 + 1e-12
        np.testing.assert_allclose(exact, grid_allocation(coefficients, x, 3.0), atol=2e-3)


def test_task_reference_solution_is_feasible():
    for seed in range(5):
        oracle = task_dual_oracle(generate_tasks(seed))
        solution = oracle.reference_solution()
        assert oracle.primal_summary(solution.x)["demand_residual"] <= 1e-6


@pytest.mark.parametrize("family", ["quadratic", "scalar_benchmark", "tcp", "flow", "tasks"])
def test_gradients_match_finite_differences(family):
    oracle = family_oracles()[family]
    rng = make_rng(11, substream=33)
    checked = 0
    while checked < fd_points:
        x = oracle.sample_point(rng)
        try:
            error = fd_gradient_check(oracle, x)
        except (KinkProximityError, DomainError):
            continue
        assert error <= 1e-5
        checked += 1


@pytest.mark.parametrize("family", ["quadratic", "tcp", "flow", "tasks"])
def test_reported_lipschitz_bounds_difference_quotients(family):
    oracle = family_oracles()[family]
    quotients = oracle.difference_quotients(seed=5, pairs=lipschitz_pairs)
    assert np.max(quotients) <= oracle.lipschitz * (1.0 + 1e-9)
    assert oracle.estimate_lipschitz(seed=5, pairs=200) <= 1.1 * oracle.lipschitz * (1.0 + 1e-9)


def test_tcp_dual_bound_covers_difference_quotients():
    oracle = family_oracles()["tcp"]
    quotients = oracle.difference_quotients(seed=6, pairs=lipschitz_pairs)
    assert np.max(quotients) <= oracle.lipschitz_dual_bound * (1.0 + 1e-9)


def test_fd_gradient_check_preconditions():
    with pytest.raises(ParameterError):
        fd_gradient_check(quadratic_oracle([1.0]), [0.0], h=0.0)
    with pytest.raises(DomainError):
        fd_gradient_check(tcp_dual_oracle(single_link()), [1e-7])
    with pytest.raises(KinkProximityError):
        fd_gradient_check(tcp_dual_oracle(single_link()), [1000.0 / 1.0001])


def test_fd_gradient_check_on_quadratic_is_exact():
    assert fd_gradient_check(quadratic_oracle([1.0, -2.0], scale=3.0), [0.3, 0.7], h=1e-5) <= 1e-9


@pytest.mark.parametrize("family", ["quadratic", "scalar_benchmark", "tcp", "flow", "tasks"])
def test_instance_round_trip(tmp_path, family):
    oracle = family_oracles()[family]
    path = tmp_path / f"{family}.json"
    save_instance(oracle, path)
    loaded = load_instance(path)
    assert loaded.family == oracle.family
    assert loaded.to_dict() == oracle.to_dict()
    x = oracle.sample_point(make_rng(3, substream=34))
    assert loaded.eval(x) == oracle.eval(x)


def test_instance_errors(tmp_path):
    with pytest.raises(ProblemError):
        oracle_from_dict({"family": "lattice"})
    with pytest.raises(ProblemError):
        oracle_from_dict({"family": "tasks", "demand": [1.0]})
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ProblemError):
        load_instance(broken)
    listed = tmp_path / "list.json"
    listed.write_text(json.dumps([1, 2]))
    with pytest.raises(ProblemError):
        load_instance(listed)
    with pytest.raises(ProblemError):
        load_instance(tmp_path / "missing.json")


def first_hit(trace):
    return np.inf if trace.hit_iteration is None else trace.hit_iteration


def test_task_allocation_iteration_counts():
    medians = {}
    for count in circular_counts:
        quantization_set = construct_set("circular", count=count)
        hits = []
        for seed in range(20):
            oracle = task_dual_oracle(generate_tasks(seed))
            trace = run(oracle, quantization_set, make_schedule("constant", gamma=0.1),
                        StoppingRule.grad_norm(0.1), max_iter=1000)
            hits.append(first_hit(trace))
        medians[count] = float(np.median(hits))
    for count in circular_counts:
        assert 25 <= medians[count] <= 130
    assert medians[16] <= medians[4]


def test_tcp_trace_carries_primal_columns():
    oracle = tcp_dual_oracle(generate_tcp(1, sources=3, links=4))
    trace = run(oracle, construct_set("sign", dims=4), make_schedule("constant", gamma=0.1), max_iter=30,
                x0=np.zeros(4))
    frame = trace.to_frame()
    assert list(frame.columns) == ["t", "f", "grad_norm", "l_alpha", "gamma", "bits", "primal_objective",
                                   "primal_residual"]
    utility, violation = oracle.primal_values(trace.x_final)
    assert frame["primal_objective"].iloc[-1] == pytest.approx(utility)
    assert frame["primal_residual"].iloc[-1] == pytest.approx(violation)
    assert frame["primal_objective"].iloc[0] == pytest.approx(oracle.primal_values(np.zeros(4))[0])
    assert np.all(frame["primal_residual"] >= 0.0)
    assert trace.floor("primal_residual") >= 0.0
