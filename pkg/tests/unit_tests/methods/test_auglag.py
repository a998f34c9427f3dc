import numpy as np
import pytest

from eqpal.methods.auglag import (
    AuglagConfig,
    SubproblemResult,
    SubsolverMethod,
    recompute_schedule,
    run_auglag,
    update_multipliers,
)
from tests.utils.utils import get_chain_problem


class ScriptedSubsolver:
    """Returns prepared constraint values and records its calls."""

    def __init__(self, constraints, chi=0.0):
        self.constraints = [np.asarray(c, dtype=float) for c in constraints]
        self.chi = chi
        self.calls = []

    def __call__(self, mu, ctx, omega):
        index = min(len(self.calls), len(self.constraints) - 1)
        self.calls.append((np.array(mu), ctx, omega))
        return SubproblemResult(
            mu=np.asarray(mu) * 0.5,
            objective=float(len(self.calls)),
            constraints=self.constraints[index],
            chi=self.chi,
            iterations=2,
            trace=({"iteration": 0},),
            counts={"primal": len(self.calls)},
        )


def test_update_multipliers():
    assert np.allclose(
        update_multipliers(np.array([1.0, -1.0]), 10.0, np.array([0.1, 0.2])),
        [0.0, -3.0],
    )


def test_initial_schedule():
    ((tau, pi, omega),) = recompute_schedule([], 10.0, 50.0, 1e-5)

    assert tau == 10.0
    assert np.isclose(pi, 0.1)
    assert np.isclose(omega, 10.0**-0.1)


def test_schedule_after_feasible_and_infeasible_majors():
    schedule = recompute_schedule([True, False], 10.0, 50.0, 1e-5)

    assert len(schedule) == 3
    assert schedule[1][0] == 10.0
    assert np.isclose(schedule[1][1], 0.1 / 10.0**0.9)
    assert np.isclose(schedule[1][2], 10.0**-0.1 / 10.0)
    assert schedule[2][0] == 500.0
    assert np.isclose(schedule[2][1], 500.0**-0.1)
    assert np.isclose(schedule[2][2], 1.0 / 500.0)


def test_schedule_respects_the_optimality_floor():
    schedule = recompute_schedule([True] * 10, 10.0, 50.0, 1e-5)

    assert all(omega >= 1e-5 for _, _, omega in schedule)
    assert schedule[-1][2] == 1e-5


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"tau0": 0.0}, "tau0"),
        ({"scale_a": 1.0}, "scale_a"),
        ({"pi_star": 0.0}, "pi_star"),
        ({"omega_star": -1.0}, "omega_star"),
        ({"max_major_iters": 0}, "max_major_iters"),
        ({"inherit_snapshots": -1}, "inherit_snapshots"),
    ],
)
def test_auglag_config_validation(changes, message):
    with pytest.raises(ValueError, match=message):
        AuglagConfig(**changes)


def test_auglag_config_accepts_method_names():
    assert AuglagConfig(method="rom").method == SubsolverMethod.ROM


def test_run_auglag_stops_when_both_tolerances_hold():
    problem = get_chain_problem()
    subsolver = ScriptedSubsolver([[0.0, 0.0]])

    result = run_auglag(
        problem=problem,
        config=AuglagConfig(),
        subsolver=subsolver,
        mu0=np.array([1.0, 1.0]),
    )

    assert result.converged
    assert len(result.records) == 1
    assert np.array_equal(result.final.mu, [0.5, 0.5])
    assert result.final.counts == {"primal": 1}
    assert result.final.subproblem_iterations == 2
    assert result.final.wall_time >= 0


def test_feasible_major_updates_the_multipliers():
    problem = get_chain_problem()
    subsolver = ScriptedSubsolver([[0.05, 0.0], [0.0, 0.0]])

    result = run_auglag(
        problem=problem,
        config=AuglagConfig(),
        subsolver=subsolver,
        mu0=np.zeros(2),
    )

    first, second = result.records
    assert first.feasible
    assert np.array_equal(first.theta, [0.0, 0.0])
    assert np.allclose(second.theta, [-0.5, 0.0])
    assert second.tau == 10.0
    assert np.isclose(second.pi, 0.1 / 10.0**0.9)
    assert np.allclose(subsolver.calls[1][1].theta, [-0.5, 0.0])
    assert subsolver.calls[1][2] == second.omega


def test_infeasible_majors_increase_the_penalty():
    problem = get_chain_problem()
    subsolver = ScriptedSubsolver([[1.0, 0.0]])

    result = run_auglag(
        problem=problem,
        config=AuglagConfig(max_major_iters=3),
        subsolver=subsolver,
        mu0=np.zeros(2),
    )

    assert not result.converged
    assert [record.tau for record in result.records] == [10.0, 500.0, 25000.0]
    assert all(not record.feasible for record in result.records)
    assert all(
        np.array_equal(record.theta, [0.0, 0.0]) for record in result.records
    )
    assert [call[1].tau for call in subsolver.calls] == [10.0, 500.0, 25000.0]


def test_large_criticality_prevents_convergence():
    problem = get_chain_problem()
    subsolver = ScriptedSubsolver([[0.0, 0.0]], chi=1.0)

    result = run_auglag(
        problem=problem,
        config=AuglagConfig(max_major_iters=2),
        subsolver=subsolver,
        mu0=np.zeros(2),
    )

    assert not result.converged
    assert len(result.records) == 2


def test_callback_sees_every_major():
    seen = []
    subsolver = ScriptedSubsolver([[1.0, 0.0], [0.0, 0.0]])

    result = run_auglag(
        problem=get_chain_problem(),
        config=AuglagConfig(max_major_iters=5),
        subsolver=subsolver,
        mu0=np.zeros(2),
        callback=seen.append,
    )

    assert [record.iteration for record in seen] == [0, 1]
    assert seen[-1] is result.final


@pytest.mark.parametrize(
    "mu0, message",
    [
        (np.array([3.0, 0.0]), "not in the box"),
        (np.zeros(3), "parameter vector has shape"),
    ],
)
def test_run_auglag_rejects_bad_start(mu0, message):
    with pytest.raises(ValueError, match=message):
        run_auglag(
            problem=get_chain_problem(),
            config=AuglagConfig(),
            subsolver=ScriptedSubsolver([[0.0, 0.0]]),
            mu0=mu0,
        )
