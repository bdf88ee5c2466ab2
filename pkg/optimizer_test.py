"""
Tests for step schedules, projections, iteration engines and traces
...

Requirement:
pytest module -> pip install pytest

To test:
> pytest optimizer_test.py

"""
import math
import numpy as np
import pytest
from qgrad.bounds.planner import ProblemConstants, descent_margins
from qgrad.exceptions import DimensionError, DomainError, ParameterError, ScheduleError, StoppingRuleError
from qgrad.optimizer.domain import Domain, measure_L_alpha, project, scalar_projection_margins
from qgrad.optimizer.engine import (RunMethod, StoppingRule, gradient_step, normalized_step, qgm_step, run,
                                    sign_projected_step)
from qgrad.optimizer.schedule import ScheduleKind, make_schedule
from qgrad.problems.oracle import quadratic_oracle, random_quadratic, scalar_benchmark_oracle
from qgrad.problems.tcp import generate_tcp, tcp_dual_oracle
from qgrad.quantization.directions import construct_set
from qgrad.random_streams import make_rng

descent_kinds = ["sign", "minimal", "normal_basis"]
trajectory_seeds = list(range(1000))
diminishing_seeds = list(range(20))


def test_constant_schedule():
    schedule = make_schedule("constant", gamma=0.1)
    assert schedule(0) == 0.1
    assert schedule(10 ** 6) == 0.1
    np.testing.assert_array_equal(schedule.values(3), [0.1, 0.1, 0.1])


def test_power_schedule():
    schedule = make_schedule(ScheduleKind.POWER, gamma0=1.0, power=0.5)
    assert schedule(3) == pytest.approx(0.5)
    np.testing.assert_allclose(schedule.values(4), [1.0, 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(3.0), 0.5])


def test_summable_schedule_is_rejected():
    with pytest.raises(ScheduleError, match="summable"):
        make_schedule("power", gamma0=1.0, power=1.5)


@pytest.mark.parametrize("kwargs", [{"kind": "power", "gamma0": 1.0, "power": 0.0},
                                    {"kind": "constant", "gamma": 0.0},
                                    {"kind": "constant", "gamma": -1.0},
                                    {"kind": "power", "gamma0": -1.0, "power": 0.5},
                                    {"kind": "cosine", "gamma": 1.0}])
def test_invalid_schedules(kwargs):
    with pytest.raises(ScheduleError):
        make_schedule(**kwargs)


def test_projection():
    np.testing.assert_array_equal(project([-1.0, 2.0], Domain.orthant()), [0.0, 2.0])
    np.testing.assert_array_equal(project([-1.0, 2.0], Domain.box([0.0, 0.0], [1.0, 1.0])), [0.0, 1.0])
    np.testing.assert_array_equal(project([-1.0, 2.0], Domain.unconstrained()), [-1.0, 2.0])
    np.testing.assert_allclose(project([3.0, 4.0], Domain.ball([0.0, 0.0], 1.0)), [0.6, 0.8])
    np.testing.assert_array_equal(project([1.5, 1.0], Domain.ball([1.0, 1.0], 1.0)), [1.5, 1.0])
    with pytest.raises(DomainError):
        project([np.nan, 1.0], Domain.orthant())


def test_domain_contains():
    assert Domain.orthant().contains([0.0, -1e-13])
    assert not Domain.orthant().contains([0.0, -1e-6])
    assert Domain.box(-1.0, 1.0).contains([0.5, -0.5])
    assert Domain.ball([0.0, 0.0], 2.0).contains([0.0, 2.0])
    assert not Domain.ball([0.0, 0.0], 2.0).contains([1.5, 1.5])
    with pytest.raises(DomainError):
        Domain.box(1.0, 0.0)
    with pytest.raises(DomainError):
        Domain.ball([0.0, 0.0], 0.0)


@pytest.mark.parametrize("domain", [Domain.unconstrained(), Domain.orthant(),
                                    Domain.box([-1.0, 0.0, 0.5], [1.0, 2.0, 0.75]),
                                    Domain.ball([0.5, -0.5, 1.0], 1.5)], ids=lambda d: d.kind.value)
def test_projection_is_nonexpansive(domain):
    rng = make_rng(3, substream=13)
    count = 10 ** 5
    firsts = rng.standard_normal((count, 3)) * 3.0
    seconds = rng.standard_normal((count, 3)) * 3.0
    violations = 0
    for x, y in zip(firsts, seconds):
        moved = np.linalg.norm(project(x, domain) - project(y, domain))
        if moved > np.linalg.norm(x - y) * (1.0 + 1e-12) + 1e-12:
            violations += 1
    assert violations == 0


def test_measure_L_alpha():
    assert measure_L_alpha([0.0, 1.0], [1.0, -1.0]) == pytest.approx(1.0)
    assert measure_L_alpha([0.0, 2.0], [3.0, 0.0]) == 0.0
    assert measure_L_alpha([2.0], [1.0], alpha=0.5) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        measure_L_alpha([-1.0], [1.0])
    with pytest.raises(ParameterError):
        measure_L_alpha([1.0], [1.0], alpha=0.0)


def test_projection_inequalities_on_random_tuples():
    rng = make_rng(7, substream=11)
    count = 10 ** 5
    xs = rng.exponential(1.0, count) * (rng.random(count) < 0.9)
    zs = rng.standard_normal(count) * rng.choice([0.01, 1.0, 100.0], count)
    alphas = np.sort(rng.uniform(0.0, 3.0, (count, 2)), axis=1)
    betas = rng.uniform(0.0, 1.0, count)
    violations = 0
    for x, z, (alpha1, alpha2), beta in zip(xs, zs, alphas, betas):
        if not scalar_projection_margins(x, z, alpha1, alpha2, beta).all():
            violations += 1
    assert violations == 0


@pytest.mark.parametrize("kwargs", [{"beta": 1.5}, {"alpha1": 2.0, "alpha2": 1.0}, {"x": -1.0}])
def test_projection_margins_reject_bad_tuples(kwargs):
    args = {"x": 1.0, "z": 1.0, "alpha1": 1.0, "alpha2": 1.0, "beta": 1.0}
    args.update(kwargs)
    with pytest.raises(ParameterError):
        scalar_projection_margins(**args)


def test_qgm_step_sign_set():
    sign2 = construct_set("sign", dims=2)
    x_next = qgm_step([0.0, 0.0], [1.0, 2.0], sign2, 1.0, Domain.unconstrained())
    np.testing.assert_allclose(x_next, -np.ones(2) / math.sqrt(2.0))
    x_next = qgm_step([0.0, 0.0], [1.0, 2.0], sign2, 1.0, Domain.orthant())
    np.testing.assert_array_equal(x_next, [0.0, 0.0])


def test_qgm_step_holds_on_zero_gradient():
    x = np.array([0.3, 0.7])
    np.testing.assert_array_equal(qgm_step(x, [0.0, 0.0], construct_set("minimal", dims=2), 1.0,
                                           Domain.orthant()), x)


def test_qgm_step_preconditions():
    sign2 = construct_set("sign", dims=2)
    with pytest.raises(DimensionError):
        qgm_step([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], sign2, 1.0, Domain.unconstrained())
    with pytest.raises(ParameterError):
        qgm_step([0.0, 0.0], [1.0, 1.0], sign2, -0.1, Domain.unconstrained())
    with pytest.raises(DomainError):
        qgm_step([-1.0, 0.0], [1.0, 1.0], sign2, 0.1, Domain.orthant())


def test_sign_projected_step():
    np.testing.assert_allclose(sign_projected_step([1.0, 1.0], [0.0, -1.0], math.sqrt(2.0)), [0.0, 2.0])
    with pytest.raises(DomainError):
        sign_projected_step([-1.0, 1.0], [1.0, 1.0], 0.1)


@pytest.mark.parametrize("dims", list(range(1, 11)))
def test_sign_projected_step_matches_enumerated_argmax(dims):
    directions = construct_set("sign", dims=dims).matrix
    assert directions.shape == (2 ** dims, dims)
    rng = make_rng(dims, substream=12)
    for _ in range(50):
        x = rng.uniform(0.0, 1.0, dims)
        gradient = rng.standard_normal(dims)
        best = directions[int(np.argmax(directions @ gradient))]
        np.testing.assert_allclose(sign_projected_step(x, gradient, 0.3), np.maximum(x - 0.3 * best, 0.0),
                                   atol=1e-12)


def test_reference_steps():
    x = np.array([1.0, 1.0])
    np.testing.assert_allclose(gradient_step(x, [2.0, 0.0], 0.25, Domain.unconstrained()), [0.5, 1.0])
    np.testing.assert_allclose(normalized_step(x, [3.0, 4.0], 5.0, Domain.orthant()), [0.0, 0.0])
    np.testing.assert_array_equal(normalized_step(x, [0.0, 0.0], 5.0, Domain.orthant()), x)


def test_run_stops_on_gradient_norm():
    oracle = quadratic_oracle([1.0, 1.0])
    trace = run(oracle, construct_set("minimal", dims=2), make_schedule("constant", gamma=0.05),
                StoppingRule.grad_norm(0.1), max_iter=1000)
    assert trace.stop_reason == "grad_norm"
    assert trace.grad_norm[trace.hit_iteration] <= 0.1
    assert np.all(trace.grad_norm[:trace.hit_iteration] > 0.1)
    assert trace.iterations == trace.hit_iteration


def test_run_hits_at_zero_when_started_at_optimum():
    oracle = quadratic_oracle([1.0, -2.0])
    trace = run(oracle, construct_set("sign", dims=2), make_schedule("constant", gamma=0.1),
                StoppingRule.gap(1e-9), x0=[1.0, -2.0])
    assert trace.hit_iteration == 0
    assert len(trace) == 1


def test_run_without_hit_reports_max_iter():
    oracle = quadratic_oracle([5.0, 5.0])
    trace = run(oracle, construct_set("sign", dims=2), make_schedule("constant", gamma=0.01),
                StoppingRule.grad_norm(1e-3), max_iter=50)
    assert trace.hit_iteration is None
    assert trace.stop_reason == "max_iter"
    assert len(trace) == 51


def test_max_iter_rule_caps_the_run():
    trace = run(quadratic_oracle([5.0]), construct_set("sign", dims=1), make_schedule("constant", gamma=0.01),
                StoppingRule.max_iter(7))
    assert trace.iterations == 7
    assert trace.hit_iteration is None


@pytest.mark.parametrize("kind", ["sign", "minimal"])
def test_run_from_stationary_point_holds_for_max_iter(kind):
    x_star = [1.0, -2.0]
    trace = run(quadratic_oracle(x_star), construct_set(kind, dims=2), make_schedule("constant", gamma=0.1),
                max_iter=40, x0=x_star)
    assert trace.stop_reason == "max_iter"
    assert trace.iterations == 40
    np.testing.assert_array_equal(trace.x_final, x_star)
    assert np.all(trace.f == trace.f[0])


def test_constant_step_floor_does_not_move_with_horizon():
    oracle = quadratic_oracle([0.35])
    sign1 = construct_set("sign", dims=1)
    schedule = make_schedule("constant", gamma=0.1)
    short = run(oracle, sign1, schedule, max_iter=1000, x0=[0.0])
    long = run(oracle, sign1, schedule, max_iter=2000, x0=[0.0])
    assert short.floor("grad_norm") > 0.0
    assert long.floor("grad_norm") == pytest.approx(short.floor("grad_norm"), rel=0.2)


def test_run_records_bits_and_iterates():
    oracle = quadratic_oracle([1.0, 1.0, 1.0])
    trace = run(oracle, construct_set("sign", dims=3), make_schedule("constant", gamma=0.1), max_iter=20,
                record_x=True)
    np.testing.assert_array_equal(trace.bits, 3 * np.arange(21))
    assert trace.xs.shape == (21, 3)
    np.testing.assert_array_equal(trace.xs[-1], trace.x_final)
    assert np.all(np.isnan(trace.l_alpha))


def test_unquantized_baselines_account_full_precision_bits():
    oracle = quadratic_oracle([1.0, 1.0])
    trace = run(oracle, None, make_schedule("constant", gamma=0.5), max_iter=3, method=RunMethod.GRADIENT)
    assert trace.bits_per_iteration == 128
    with pytest.raises(ParameterError):
        run(oracle, None, make_schedule("constant", gamma=0.5), max_iter=3)


def test_run_preconditions():
    quadratic = quadratic_oracle([1.0, 1.0])
    schedule = make_schedule("constant", gamma=0.1)
    with pytest.raises(DimensionError):
        run(quadratic, construct_set("sign", dims=3), schedule)
    with pytest.raises(StoppingRuleError):
        run(quadratic, construct_set("sign", dims=2), schedule, StoppingRule.l_alpha(0.1))
    tcp = tcp_dual_oracle(generate_tcp(1, sources=3, links=4))
    with pytest.raises(StoppingRuleError):
        run(tcp, construct_set("sign", dims=4), schedule, StoppingRule.gap(0.1))
    with pytest.raises(DomainError):
        run(tcp, construct_set("sign", dims=4), schedule, x0=-np.ones(4))
    with pytest.raises(StoppingRuleError):
        StoppingRule.grad_norm(0.0)


def test_trace_frame_and_floor(tmp_path):
    oracle = quadratic_oracle([2.0], domain=Domain.orthant())
    trace = run(oracle, construct_set("sign", dims=1), make_schedule("constant", gamma=0.3), max_iter=99)
    frame = trace.to_frame()
    assert list(frame.columns) == ["t", "f", "grad_norm", "l_alpha", "gamma", "bits"]
    assert len(frame) == 100
    assert trace.floor("l_alpha") == pytest.approx(float(np.mean(trace.l_alpha[-10:])))
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    trace.to_csv(first)
    run(oracle, construct_set("sign", dims=1), make_schedule("constant", gamma=0.3), max_iter=99).to_csv(second)
    assert first.read_bytes() == second.read_bytes()


def test_oscillation_shows_as_ascent_steps():
    oracle = quadratic_oracle([0.03])
    trace = run(oracle, construct_set("sign", dims=1), make_schedule("constant", gamma=0.1), max_iter=10)
    assert trace.ascent_steps() > 0


@pytest.mark.parametrize("kind", descent_kinds)
def test_steps_outside_target_set_descend_by_margin(kind):
    violations = 0
    for seed in trajectory_seeds:
        dims = 2 + seed % 3
        oracle = random_quadratic(seed, dims, substream=descent_kinds.index(kind))
        quantization_set = construct_set(kind, dims=dims)
        epsilon = 0.5 * float(np.linalg.norm(oracle.grad(oracle.initial_point())))
        consts = ProblemConstants(lipschitz=oracle.lipschitz, cos_theta=quantization_set.analytic_cos_theta,
                                  epsilon=epsilon)
        gamma = quantization_set.analytic_cos_theta * epsilon / oracle.lipschitz
        delta = descent_margins(consts, gamma).delta
        trace = run(oracle, quantization_set, make_schedule("constant", gamma=gamma), max_iter=25)
        for t in range(trace.iterations):
            if trace.grad_norm[t] > epsilon:
                slack = 1e-12 * (1.0 + abs(trace.f[t]))
                if trace.f[t + 1] > trace.f[t] - delta + slack:
                    violations += 1
    assert violations == 0


def test_sign_steps_on_orthant_descend_by_margin():
    violations = 0
    checked = 0
    for seed in trajectory_seeds:
        dims = 2 + seed % 4
        oracle = random_quadratic(seed, dims, domain=Domain.orthant(), substream=5)
        sign_set = construct_set("sign", dims=dims)
        x0 = oracle.initial_point()
        epsilon = 0.5 * measure_L_alpha(x0, oracle.grad(x0))
        if epsilon <= 0.0:
            continue
        grad0_norm = float(np.linalg.norm(oracle.grad(x0)))
        gamma = epsilon ** 2 / (oracle.lipschitz * grad0_norm * dims ** 1.5)
        trace = run(oracle, sign_set, make_schedule("constant", gamma=gamma), max_iter=25, record_x=True)
        for t in range(trace.iterations):
            grad_bound = trace.grad_norm[t]
            if trace.l_alpha[t] <= epsilon or grad_bound <= 0.0:
                continue
            consts = ProblemConstants(lipschitz=oracle.lipschitz, grad_bound=grad_bound, dims=dims,
                                      epsilon=epsilon)
            limit = 2.0 * epsilon ** 2 / (oracle.lipschitz * grad_bound * dims ** 1.5)
            if not (gamma < limit and gamma <= grad_bound * math.sqrt(dims)):
                continue
            checked += 1
            delta_bar = descent_margins(consts, gamma, need_bar=True).delta_bar
            slack = 1e-12 * (1.0 + abs(trace.f[t]))
            if trace.f[t + 1] > trace.f[t] - delta_bar + slack:
                violations += 1
    assert checked > 0
    assert violations == 0


def test_diminishing_steps_reach_the_constrained_optimum():
    schedule = make_schedule("power", gamma0=1.0, power=0.6)
    for seed in diminishing_seeds:
        oracle = random_quadratic(seed, 3, domain=Domain.orthant(), substream=6)
        trace = run(oracle, construct_set("sign", dims=3), schedule, max_iter=20000)
        assert np.linalg.norm(trace.x_final - oracle.x_star) <= 1e-2


def test_constant_step_keeps_scalar_benchmark_away_from_optimum():
    oracle = scalar_benchmark_oracle()
    trace = run(oracle, construct_set("sign", dims=1), make_schedule("constant", gamma=0.5), max_iter=1000,
                record_x=True, x0=[0.25])
    distances = np.abs(trace.xs[:, 0] - 1.0)
    assert np.all(distances >= 0.2)


def test_diminishing_step_converges_on_scalar_benchmark():
    oracle = scalar_benchmark_oracle()
    trace = run(oracle, construct_set("sign", dims=1), make_schedule("power", gamma0=1.0, power=0.6),
                max_iter=2000, x0=[0.25])
    assert abs(trace.x_final[0] - 1.0) <= 0.05


def test_scalar_benchmark_constant_outer_branch_holds_outside_band():
    oracle = scalar_benchmark_oracle()
    trace = run(oracle, construct_set("sign", dims=1), make_schedule("constant", gamma=0.25), max_iter=20,
                x0=[3.0])
    np.testing.assert_array_equal(trace.x_final, [3.0])
    assert np.all(trace.grad_norm == 0.0)


def test_scalar_benchmark_linear_outer_branch_walks_back_to_band():
    oracle = scalar_benchmark_oracle(outer="linear")
    trace = run(oracle, construct_set("sign", dims=1), make_schedule("constant", gamma=0.25), max_iter=4,
                record_x=True, x0=[3.0])
    np.testing.assert_array_equal(trace.xs[:, 0], [3.0, 2.75, 2.5, 2.25, 2.0])
    assert np.all(np.diff(trace.f) < 0.0)
