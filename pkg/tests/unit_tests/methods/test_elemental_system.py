import numpy as np
import pytest

from eqpal.data.problem import ALContext
from eqpal.methods.elemental_system import (
    HdmSolver,
    SolverError,
    al_gradient_split,
    assemble_functionals,
    assemble_jacobians,
    assemble_residual,
    augmented_lagrangian,
    augmented_lagrangian_partials,
    lu_solve_checked,
    newton_solve,
    reduced_al_value_gradient,
    solve_adjoint,
    solve_primal,
    solve_sensitivity,
)
from tests.utils.utils import (
    finite_difference_gradient,
    finite_difference_jacobian,
    get_chain_problem,
)

MU = np.array([1.5, -0.5])
CTX = ALContext(theta=np.array([0.3, -0.2]), tau=10.0)


def dense_chain_residual(problem, u, mu):
    """Residual of the chain problem written out without element loops."""
    kernel = problem.kernel
    padded = np.concatenate([[0.0], u, [0.0]])
    return (
        2.0 * u
        - padded[:-2]
        - padded[2:]
        + kernel.beta * u**3
        - kernel.h**2 * (mu[0] + mu[1] * kernel.x)
    )


def test_assemble_residual_matches_dense_formula():
    problem = get_chain_problem(n_elements=7)
    u = np.linspace(-0.3, 0.4, 7)

    residual = assemble_residual(problem=problem, u=u, mu=MU)

    assert np.allclose(residual, dense_chain_residual(problem, u, MU))


def test_unit_weights_reproduce_unweighted_assembly():
    problem = get_chain_problem(n_elements=6)
    u = np.linspace(0.1, 0.2, 6)
    ones = np.ones(problem.n_elements)

    assert np.array_equal(
        assemble_residual(problem=problem, u=u, mu=MU),
        assemble_residual(problem=problem, u=u, mu=MU, weights=ones),
    )
    weighted = assemble_functionals(problem=problem, u=u, mu=MU, weights=ones)
    plain = assemble_functionals(problem=problem, u=u, mu=MU)
    assert weighted.objective == plain.objective
    assert np.array_equal(weighted.constraints, plain.constraints)


def test_zero_weights_skip_elements():
    problem = get_chain_problem(n_elements=6)
    u = np.linspace(0.1, 0.2, 6)
    weights = np.array([0.0, 2.0, 0.0, 0.0, 1.0, 0.0])

    residual = assemble_residual(problem=problem, u=u, mu=MU, weights=weights)
    expected = dense_chain_residual(problem, u, MU) * weights

    assert np.allclose(residual, expected)
    assert np.all(residual[weights == 0] == 0.0)


def test_all_zero_weights_assemble_zero():
    problem = get_chain_problem(n_elements=4)
    weights = np.zeros(4)
    u = np.ones(4)

    functionals = assemble_functionals(
        problem=problem, u=u, mu=MU, weights=weights
    )
    jac_u, jac_mu = assemble_jacobians(
        problem=problem, u=u, mu=MU, weights=weights
    )

    assert functionals.objective == 0.0
    assert np.array_equal(functionals.constraints, np.zeros(2))
    assert not jac_u.any() and not jac_mu.any()


def test_weights_with_wrong_shape_are_rejected():
    problem = get_chain_problem(n_elements=4)

    with pytest.raises(ValueError, match="weight vector has shape"):
        assemble_residual(
            problem=problem, u=np.zeros(4), mu=MU, weights=np.ones(3)
        )


def test_jacobians_match_finite_differences():
    problem = get_chain_problem(n_elements=6)
    u = np.linspace(-0.5, 0.5, 6)

    jac_u, jac_mu = assemble_jacobians(problem=problem, u=u, mu=MU)

    assert np.allclose(
        jac_u,
        finite_difference_jacobian(
            lambda x: assemble_residual(problem=problem, u=x, mu=MU), u
        ),
        atol=1e-8,
    )
    assert np.allclose(
        jac_mu,
        finite_difference_jacobian(
            lambda x: assemble_residual(problem=problem, u=u, mu=x), MU
        ),
        atol=1e-8,
    )


def test_functional_partials_match_finite_differences():
    problem = get_chain_problem(n_elements=6)
    u = np.linspace(-0.5, 0.5, 6)

    functionals = assemble_functionals(problem=problem, u=u, mu=MU)

    def objective_of_u(x):
        return assemble_functionals(problem=problem, u=x, mu=MU).objective

    def objective_of_mu(x):
        return assemble_functionals(problem=problem, u=u, mu=x).objective

    def constraints_of_u(x):
        return assemble_functionals(problem=problem, u=x, mu=MU).constraints

    def constraints_of_mu(x):
        return assemble_functionals(problem=problem, u=u, mu=x).constraints

    assert np.allclose(
        functionals.objective_u, finite_difference_gradient(objective_of_u, u)
    )
    assert np.allclose(
        functionals.objective_mu,
        finite_difference_gradient(objective_of_mu, MU),
    )
    assert np.allclose(
        functionals.constraints_u,
        finite_difference_jacobian(constraints_of_u, u),
    )
    assert np.allclose(
        functionals.constraints_mu,
        finite_difference_jacobian(constraints_of_mu, MU),
    )


def test_augmented_lagrangian_value():
    problem = get_chain_problem(n_elements=5)
    functionals = assemble_functionals(
        problem=problem, u=np.full(5, 0.2), mu=MU
    )
    c = functionals.constraints

    value, lagrangian = augmented_lagrangian(functionals=functionals, ctx=CTX)

    assert np.isclose(lagrangian, functionals.objective - CTX.theta @ c)
    assert np.isclose(value, lagrangian + 0.5 * CTX.tau * c @ c)


def test_augmented_lagrangian_partials_without_penalty():
    problem = get_chain_problem(n_elements=5)
    functionals = assemble_functionals(
        problem=problem, u=np.full(5, 0.2), mu=MU
    )

    with_penalty = augmented_lagrangian_partials(
        functionals=functionals, ctx=CTX
    )
    without_penalty = augmented_lagrangian_partials(
        functionals=functionals, ctx=CTX, penalty=False
    )
    penalty_u = CTX.tau * functionals.constraints_u.T @ (
        functionals.constraints
    )

    assert np.allclose(with_penalty[0] - without_penalty[0], penalty_u)


def test_newton_solve_scalar():
    result = newton_solve(
        residual=lambda x: x**2 - 2.0,
        jacobian=lambda x: np.array([[2.0 * x[0]]]),
        x0=np.array([1.0]),
    )

    assert np.isclose(result.x[0], np.sqrt(2.0))
    assert result.residual_norm <= 1e-12
    assert result.iterations > 0


def test_newton_solve_converged_start_takes_no_step():
    result = newton_solve(
        residual=lambda x: x - 1.0,
        jacobian=lambda x: np.eye(1),
        x0=np.array([1.0]),
    )

    assert result.iterations == 0


def test_newton_solve_raises_solver_error():
    with pytest.raises(SolverError, match="did not converge") as error:
        newton_solve(
            residual=lambda x: x**2 + 1.0,
            jacobian=lambda x: np.array([[2.0 * x[0]]]),
            x0=np.array([0.5]),
            max_iters=5,
        )

    assert error.value.iterations == 5
    assert error.value.residual_norm >= 1.0


def test_newton_solve_reports_an_exhausted_line_search(caplog):
    with pytest.raises(SolverError, match="did not converge"):
        newton_solve(
            residual=lambda x: x,
            jacobian=lambda x: np.array([[-1.0]]),
            x0=np.array([1.0]),
            max_iters=2,
        )

    assert caplog.text.count("line search did not decrease the residual") == 2


def test_solve_primal_satisfies_residual():
    problem = get_chain_problem(n_elements=8)

    u_star = solve_primal(problem=problem, mu=MU)

    residual = assemble_residual(problem=problem, u=u_star, mu=MU)
    assert np.max(np.abs(residual)) <= 1e-12


def test_solve_primal_rejects_non_finite_guess():
    problem = get_chain_problem(n_elements=4)

    with pytest.raises(ValueError, match="not finite"):
        solve_primal(problem=problem, mu=MU, u_guess=np.full(4, np.nan))


def test_adjoint_gradient_matches_finite_differences():
    problem = get_chain_problem(n_elements=8)

    _, gradient = reduced_al_value_gradient(problem=problem, mu=MU, ctx=CTX)

    def value(mu):
        return reduced_al_value_gradient(problem=problem, mu=mu, ctx=CTX)[0]

    assert np.allclose(
        gradient, finite_difference_gradient(value, MU), atol=1e-7
    )


def test_sensitivity_matches_finite_differences():
    problem = get_chain_problem(n_elements=6)
    u_star = solve_primal(problem=problem, mu=MU)

    sensitivity = solve_sensitivity(problem=problem, u_star=u_star, mu=MU)

    assert sensitivity.shape == (6, 2)
    assert np.allclose(
        sensitivity,
        finite_difference_jacobian(
            lambda mu: solve_primal(problem=problem, mu=mu), MU
        ),
        atol=1e-7,
    )


def test_adjoint_solves_transposed_system():
    problem = get_chain_problem(n_elements=6)
    u_star = solve_primal(problem=problem, mu=MU)

    lambda_star = solve_adjoint(problem=problem, u_star=u_star, mu=MU, ctx=CTX)

    jac_u, _ = assemble_jacobians(problem=problem, u=u_star, mu=MU)
    functionals = assemble_functionals(problem=problem, u=u_star, mu=MU)
    ell_u, _ = augmented_lagrangian_partials(functionals=functionals, ctx=CTX)
    assert np.allclose(jac_u.T @ lambda_star, ell_u)


def test_gradient_split_sums_to_gradient():
    problem = get_chain_problem(n_elements=6)

    lagrangian, penalty = al_gradient_split(problem=problem, mu=MU, ctx=CTX)
    _, gradient = reduced_al_value_gradient(problem=problem, mu=MU, ctx=CTX)

    assert np.allclose(lagrangian + penalty, gradient)


def test_lu_solve_checked_raises_on_singular_matrix():
    with pytest.raises(np.linalg.LinAlgError):
        lu_solve_checked(np.zeros((2, 2)), np.ones((2, 1)))


def test_lu_solve_checked_empty_system():
    assert lu_solve_checked(np.zeros((0, 0)), np.zeros((0, 3))).shape == (
        0,
        3,
    )


def test_hdm_solver_caches_and_counts():
    problem = get_chain_problem(n_elements=6)
    hdm = HdmSolver(problem)

    first = hdm.primal(MU)
    second = hdm.primal(MU.copy())
    hdm.adjoint(MU, CTX)
    hdm.adjoint(MU, CTX)
    hdm.value_gradient(MU, CTX)

    assert first is second
    assert hdm.counts == {"primal": 1, "adjoint": 1, "sensitivity": 0}
    assert hdm.n_solves == 2
    assert [kind for kind, _ in hdm.events] == ["primal", "adjoint"]


def test_hdm_solver_counts_new_multipliers():
    problem = get_chain_problem(n_elements=6)
    hdm = HdmSolver(problem)

    hdm.adjoint(MU, CTX)
    hdm.adjoint(MU, ALContext(theta=CTX.theta, tau=20.0))

    assert hdm.counts["primal"] == 1
    assert hdm.counts["adjoint"] == 2


def test_hdm_solver_sensitivity_is_always_counted():
    problem = get_chain_problem(n_elements=6)
    hdm = HdmSolver(problem)

    hdm.sensitivity(MU)
    hdm.sensitivity(MU)

    assert hdm.counts["sensitivity"] == 2
    assert hdm.n_solves == 1


def test_hdm_solver_cache_eviction():
    problem = get_chain_problem(n_elements=4)
    hdm = HdmSolver(problem, cache_size=2)

    for shift in (0.0, 0.1, 0.2):
        hdm.primal(MU + shift)
    hdm.primal(MU)

    assert hdm.counts["primal"] == 4


def test_hdm_solver_value_gradient_matches_direct_evaluation():
    problem = get_chain_problem(n_elements=6)
    hdm = HdmSolver(problem)

    value, gradient = hdm.value_gradient(MU, CTX)
    expected_value, expected_gradient = reduced_al_value_gradient(
        problem=problem, mu=MU, ctx=CTX
    )

    assert np.isclose(value, expected_value)
    assert np.allclose(gradient, expected_gradient)
    assert np.isclose(hdm.value(MU, CTX), expected_value)
