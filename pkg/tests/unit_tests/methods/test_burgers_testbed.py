import dataclasses

import numpy as np
import pytest

from eqpal.data.problem import ALContext
from eqpal.methods.burgers_testbed import (
    SLACK_UPPER_BOUND,
    BurgersConfig,
    ConstraintSense,
    IntegralConstraint,
    IntegralKind,
    calibrate,
    full_parameters,
    generate_target,
    integral,
    make_problem,
    manufactured_forcing,
    prepare,
    slack_layout,
    source_bumps,
)
from eqpal.methods.elemental_system import (
    assemble_functionals,
    assemble_jacobians,
    assemble_residual,
    reduced_al_value_gradient,
    solve_primal,
)
from tests.utils.utils import (
    finite_difference_gradient,
    finite_difference_jacobian,
)


def test_default_configuration():
    config = BurgersConfig()

    assert config.n_cells == 128
    assert config.n_design == 8
    assert config.n_slacks == 1
    assert config.n_params == 9
    assert np.isclose(config.cell_width, 1.0 / 128)


def test_true_design_is_a_sine_sample():
    config = BurgersConfig(n_design=4)

    design = config.true_design()

    centers = (np.arange(4) + 0.5) / 4
    assert np.allclose(design, 0.5 * np.sin(2.0 * np.pi * centers))


def test_true_design_override():
    config = BurgersConfig(n_design=2, mu_true=[0.1, 0.2])

    assert np.array_equal(config.true_design(), [0.1, 0.2])


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"n_cells": 3}, "n_cells must be at least 4"),
        ({"viscosity": 0.0}, "viscosity must be positive"),
        ({"n_design": -1}, "n_design must be nonnegative"),
        ({"design_lower": 2.0}, "exceeds upper bound"),
        ({"design_upper": np.inf}, "design bounds must be finite"),
        ({"bump_width": -0.1}, "bump_width must be positive"),
        ({"mu_true": np.zeros(3)}, "mu_true has length 3"),
        ({"forcing": np.zeros(5)}, "forcing has length 5"),
    ],
)
def test_configuration_validation(kwargs, message):
    with pytest.raises(ValueError, match=message):
        BurgersConfig(**kwargs)


def test_slack_layout_follows_design():
    config = BurgersConfig(n_design=3)

    layout = slack_layout(config)

    assert layout.constraint_indices == (1,)
    assert layout.parameter_indices == (3,)
    assert layout.slack_of(0) is None
    assert layout.slack_of(1) == 3


def test_make_problem_layout():
    config = BurgersConfig(n_cells=10, n_design=3)

    problem = make_problem(config)

    assert problem.n_state == 10
    assert problem.n_elements == 10
    assert problem.n_params == 4
    assert problem.n_constraints == 2
    assert np.array_equal(problem.neighbor_dofs[0], [-1, 1])
    assert np.array_equal(problem.neighbor_dofs[-1], [8, -1])
    assert np.array_equal(problem.param_lower, [-1.0, -1.0, -1.0, 0.0])
    assert problem.param_upper[-1] == SLACK_UPPER_BOUND
    assert np.isclose(problem.total_volume, 1.0)


def test_source_bumps_shape_and_peak():
    config = BurgersConfig(n_cells=40, n_design=4)

    bumps = source_bumps(config)

    assert bumps.shape == (40, 4)
    assert np.all(bumps > 0)
    assert np.all(bumps <= 1.0)
    assert source_bumps(BurgersConfig(n_design=0)).shape == (128, 0)


def test_manufactured_solution_is_exact():
    config = BurgersConfig(n_cells=32, n_design=2)
    x = config.cell_centers
    u_manufactured = 1.0 - x + 0.2 * np.sin(np.pi * x)
    forced = dataclasses.replace(
        config, forcing=manufactured_forcing(config, u_manufactured)
    )
    problem = make_problem(forced)
    mu = np.zeros(problem.n_params)

    residual = assemble_residual(problem=problem, u=u_manufactured, mu=mu)
    u_star = solve_primal(problem=problem, mu=mu)

    assert np.max(np.abs(residual)) <= 1e-12
    assert np.allclose(u_star, u_manufactured, atol=1e-10)


def test_residual_jacobians_match_finite_differences():
    config, problem = prepare(BurgersConfig(n_cells=12, n_design=3))
    mu = full_parameters(config, [0.2, -0.3, 0.1], [0.05])
    u = problem.initial_state + 0.1 * np.sin(np.arange(12))

    jac_u, jac_mu = assemble_jacobians(problem=problem, u=u, mu=mu)

    assert np.allclose(
        jac_u,
        finite_difference_jacobian(
            lambda x: assemble_residual(problem=problem, u=x, mu=mu), u
        ),
        atol=1e-7,
    )
    assert np.allclose(
        jac_mu,
        finite_difference_jacobian(
            lambda x: assemble_residual(problem=problem, u=u, mu=x), mu
        ),
        atol=1e-7,
    )


def test_constraint_derivatives_match_finite_differences():
    config, problem = prepare(BurgersConfig(n_cells=12, n_design=3))
    mu = full_parameters(config, [0.2, -0.3, 0.1], [0.05])
    u = problem.initial_state + 0.1 * np.cos(np.arange(12))

    functionals = assemble_functionals(problem=problem, u=u, mu=mu)

    assert np.allclose(
        functionals.constraints_u,
        finite_difference_jacobian(
            lambda x: assemble_functionals(
                problem=problem, u=x, mu=mu
            ).constraints,
            u,
        ),
        atol=1e-8,
    )
    assert np.allclose(
        functionals.constraints_mu,
        finite_difference_jacobian(
            lambda x: assemble_functionals(
                problem=problem, u=u, mu=x
            ).constraints,
            mu,
        ),
        atol=1e-8,
    )


def test_constraints_assemble_to_integral_minus_rhs_plus_slack():
    config, problem = prepare(BurgersConfig(n_cells=16, n_design=2))
    u = np.linspace(1.0, 0.0, 16)
    mu = full_parameters(config, [0.0, 0.0], [0.25])

    constraints = assemble_functionals(problem=problem, u=u, mu=mu).constraints

    volume, quadratic = config.constraints
    assert np.isclose(
        constraints[0], integral(config, IntegralKind.VOLUME, u) - volume.rhs
    )
    assert np.isclose(
        constraints[1],
        integral(config, IntegralKind.QUADRATIC, u) - quadratic.rhs + 0.25,
    )


def test_prepare_calibrates_the_constraints():
    config, _ = prepare(BurgersConfig(n_cells=24, n_design=3))

    target = config.target_state
    volume, quadratic = config.constraints
    assert target is not None
    assert np.isclose(
        volume.rhs, 0.98 * integral(config, IntegralKind.VOLUME, target)
    )
    assert np.isclose(
        quadratic.rhs,
        1.01 * integral(config, IntegralKind.QUADRATIC, target),
    )


def test_target_is_reached_at_the_true_design():
    config, problem = prepare(BurgersConfig(n_cells=24, n_design=3))
    mu = full_parameters(config, config.true_design())

    u_star = solve_primal(problem=problem, mu=mu)
    functionals = assemble_functionals(problem=problem, u=u_star, mu=mu)

    assert np.isclose(functionals.objective, 0.0, atol=1e-20)


def test_generate_target_rejects_design_outside_bounds():
    config = BurgersConfig(n_cells=8, n_design=2)

    with pytest.raises(ValueError, match="outside the design bounds"):
        generate_target(config, np.array([0.0, 1.5]))


def test_full_parameters_validates_length():
    config = BurgersConfig(n_design=3)

    assert np.array_equal(
        full_parameters(config, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0, 0.0]
    )
    with pytest.raises(ValueError, match="design vector has length 2"):
        full_parameters(config, [1.0, 2.0])


def test_calibrate_with_custom_constraint():
    config = BurgersConfig(
        n_cells=8,
        n_design=1,
        constraints=(
            IntegralConstraint(
                kind=IntegralKind.QUADRATIC,
                sense=ConstraintSense.EQUALITY,
                factor=2.0,
            ),
        ),
    )
    target = np.ones(8)

    calibrated = calibrate(config, target)

    assert calibrated.n_slacks == 0
    assert np.isclose(calibrated.constraints[0].rhs, 2.0)
    assert np.array_equal(calibrated.target_state, target)


def test_al_gradient_matches_finite_differences():
    config, problem = prepare(BurgersConfig(n_cells=16, n_design=2))
    mu = full_parameters(config, [0.1, -0.2], [0.01])
    ctx = ALContext(theta=np.array([0.5, -0.1]), tau=10.0)

    _, gradient = reduced_al_value_gradient(problem=problem, mu=mu, ctx=ctx)

    def value(x):
        return reduced_al_value_gradient(problem=problem, mu=x, ctx=ctx)[0]

    assert np.allclose(
        gradient, finite_difference_gradient(value, mu), atol=1e-7
    )
