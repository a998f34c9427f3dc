import numpy as np
import pytest

from eqpal.data.problem import ALContext
from eqpal.data.reduced import (
    ConstraintFamily,
    EqpTolerances,
    EqpWeights,
    ReducedBasis,
)
from eqpal.methods.elemental_system import (
    solve_adjoint,
    solve_primal,
    solve_sensitivity,
)
from eqpal.methods.eqp import (
    PRESET_FAMILIES,
    EqpPreset,
    TrainingLp,
    assemble_training_lp,
    audit_weights,
    build_training_set,
    element_contributions,
    family_tolerance,
    hyper_evaluate,
    hyper_f_and_gradient,
    resolve_selection,
    solve_hyper,
    train_weights,
    weight_vector,
)
from eqpal.methods.lp import LpInstance, LpResult, LpStatus
from eqpal.methods.rom import (
    gram_schmidt,
    reduced_al_value_gradient,
    reduced_residual,
    solve_reduced,
)
from tests.utils.utils import get_chain_problem

MU = np.array([1.0, -0.5])
CTX = ALContext(theta=np.array([0.2, -0.1]), tau=10.0)
TOLERANCES = EqpTolerances(
    delta_dv=1e-5,
    delta_rp=1e-5,
    delta_lra=1e-5,
    delta_lga=1e-5,
    delta_c=1e-5,
    delta_dcmu=1e-5,
    delta_dcy=1e-5,
    delta_rs=1e-4,
    delta_lq=1e-5,
)


def get_basis(problem, mu=MU, ctx=CTX) -> ReducedBasis:
    u_star = solve_primal(problem=problem, mu=mu)
    lambda_star = solve_adjoint(problem=problem, u_star=u_star, mu=mu, ctx=ctx)
    sensitivity = solve_sensitivity(problem=problem, u_star=u_star, mu=mu)
    return gram_schmidt(
        [lambda_star, *sensitivity.T],
        tags=["adjoint", "sensitivity-0", "sensitivity-1"],
        offset=u_star,
    )


def get_training_setup(n_elements: int = 12):
    problem = get_chain_problem(n_elements=n_elements)
    basis = get_basis(problem)
    training_set = build_training_set(
        problem=problem, basis=basis, mus=[MU, MU + 0.1], ctx=CTX
    )
    return problem, basis, training_set


@pytest.mark.parametrize(
    "selection, tau, expected",
    [
        (EqpPreset.FULL, 1.0, tuple(ConstraintFamily)),
        (
            EqpPreset.CONVERGENCE,
            1.0,
            PRESET_FAMILIES[EqpPreset.CONVERGENCE],
        ),
        (
            EqpPreset.FULL,
            0.0,
            (
                ConstraintFamily.DV,
                ConstraintFamily.RP,
                ConstraintFamily.LRA,
                ConstraintFamily.LGA,
                ConstraintFamily.RS,
                ConstraintFamily.LQ,
            ),
        ),
        (
            [ConstraintFamily.LQ, ConstraintFamily.RP],
            0.0,
            (ConstraintFamily.RP, ConstraintFamily.LQ),
        ),
    ],
)
def test_resolve_selection(selection, tau, expected):
    assert resolve_selection(selection, tau) == expected


def test_convergence_preset_lacks_rs_and_lq():
    families = PRESET_FAMILIES[EqpPreset.CONVERGENCE]

    assert ConstraintFamily.RS not in families
    assert ConstraintFamily.LQ not in families
    assert len(families) == 7


def test_resolve_selection_rejects_penalty_families_without_penalty():
    with pytest.raises(ValueError, match="undefined for a zero penalty"):
        resolve_selection([ConstraintFamily.C], 0.0)


def test_family_tolerance_scales_penalty_families():
    assert family_tolerance(ConstraintFamily.RP, TOLERANCES, 10.0) == 1e-5
    assert np.isclose(
        family_tolerance(ConstraintFamily.DCY, TOLERANCES, 10.0), 1e-6
    )
    with pytest.raises(ValueError, match="positive penalty parameter"):
        family_tolerance(ConstraintFamily.C, TOLERANCES, 0.0)


def test_unit_weights_reproduce_the_rom():
    problem = get_chain_problem(n_elements=10)
    basis = get_basis(problem)
    ones = EqpWeights.ones(problem.n_elements)

    hyper = hyper_f_and_gradient(
        problem=problem, basis=basis, weights=ones, mu=MU, ctx=CTX
    )
    rom = reduced_al_value_gradient(
        problem=problem, basis=basis, mu=MU, ctx=CTX
    )
    hyper_solution = solve_hyper(
        problem=problem, basis=basis, weights=ones, mu=MU, ctx=CTX
    )
    rom_solution = solve_reduced(problem=problem, basis=basis, mu=MU, ctx=CTX)

    assert hyper[0] == rom[0]
    assert np.array_equal(hyper[1], rom[1])
    assert np.array_equal(hyper_solution.y_hat, rom_solution.y_hat)
    assert np.array_equal(hyper_solution.lambda_hat, rom_solution.lambda_hat)
    assert np.array_equal(hyper_solution.sens_hat, rom_solution.sens_hat)


def test_hyper_evaluate_with_unit_weights():
    problem = get_chain_problem(n_elements=10)
    basis = get_basis(problem)
    solution = solve_reduced(problem=problem, basis=basis, mu=MU, ctx=CTX)

    bundle = hyper_evaluate(
        problem=problem,
        basis=basis,
        weights=None,
        y_tilde=solution.y_hat,
        mu=MU,
        ctx=CTX,
        lambda_tilde=solution.lambda_hat,
        sens_tilde=solution.sens_hat,
    )

    assert np.isclose(bundle.volume, problem.total_volume)
    assert np.allclose(
        bundle.residual,
        reduced_residual(problem=problem, basis=basis, y=solution.y_hat, mu=MU),
    )
    assert np.max(np.abs(bundle.residual)) <= 1e-12
    assert np.max(np.abs(bundle.sensitivity_residual)) <= 1e-10
    assert np.isclose(
        bundle.value,
        reduced_al_value_gradient(
            problem=problem, basis=basis, mu=MU, ctx=CTX
        )[0],
    )


def test_hyper_evaluate_rejects_wrong_reduced_state():
    problem = get_chain_problem(n_elements=6)
    basis = get_basis(problem)

    with pytest.raises(ValueError, match="reduced state has shape"):
        hyper_evaluate(
            problem=problem,
            basis=basis,
            weights=None,
            y_tilde=np.zeros(basis.size + 1),
            mu=MU,
            ctx=CTX,
        )


@pytest.mark.parametrize("seed", [0, 1])
def test_element_contributions_are_linear_in_the_weights(seed):
    problem, basis, training_set = get_training_setup()
    point = training_set.points[1]
    rho = np.random.default_rng(seed).uniform(0.0, 2.0, problem.n_elements)

    contributions = element_contributions(
        problem=problem,
        basis=basis,
        mu=point.mu,
        solution=point.solution,
        ctx=CTX,
        families=list(ConstraintFamily),
    )
    hyper = hyper_evaluate(
        problem=problem,
        basis=basis,
        weights=rho,
        y_tilde=point.solution.y_hat,
        mu=point.mu,
        ctx=CTX,
        lambda_tilde=point.solution.lambda_hat,
        sens_tilde=point.solution.sens_hat,
    ).family_values()

    for family in ConstraintFamily:
        assert contributions[family].shape[1] == problem.n_elements
        assert np.allclose(
            contributions[family] @ rho, hyper[family], atol=1e-13
        ), family


def test_build_training_set_starts_at_the_center():
    problem, basis, training_set = get_training_setup()

    assert np.array_equal(training_set.center, MU)
    assert len(training_set.points) == 2
    assert training_set.points[0].solution.y_hat.shape == (basis.size,)
    assert training_set.points[0].solution.sens_hat.shape == (
        basis.size,
        problem.n_params,
    )


def test_training_lp_is_feasible_for_unit_weights():
    problem, basis, training_set = get_training_setup()

    training_lp = assemble_training_lp(
        problem=problem,
        basis=basis,
        training_set=training_set,
        tolerances=TOLERANCES,
        ctx=CTX,
        constraint_selection=EqpPreset.FULL,
    )

    instance = training_lp.instance
    assert training_lp.n_elements == problem.n_elements
    assert np.array_equal(instance.c, np.ones(problem.n_elements))
    assert np.all(instance.A @ np.ones(problem.n_elements) <= instance.b)
    assert training_lp.rows_of(ConstraintFamily.DV) == 4
    assert training_lp.rows_of(ConstraintFamily.RP) == 4 * basis.size
    assert training_lp.rows_of(ConstraintFamily.DCMU) == 2 * 2 * 2 * 2
    assert len(training_lp.row_families) == instance.n_rows


def test_training_lp_with_explicit_families():
    problem, basis, training_set = get_training_setup()

    training_lp = assemble_training_lp(
        problem=problem,
        basis=basis,
        training_set=training_set,
        tolerances=TOLERANCES,
        ctx=CTX,
        constraint_selection=[ConstraintFamily.DV, ConstraintFamily.LQ],
    )

    assert set(training_lp.row_families) == {
        ConstraintFamily.DV,
        ConstraintFamily.LQ,
    }
    assert training_lp.instance.n_rows == 8


@pytest.mark.parametrize("preset", [EqpPreset.CONVERGENCE, EqpPreset.FULL])
def test_trained_weights_pass_the_audit(preset):
    problem, basis, training_set = get_training_setup()
    training_lp = assemble_training_lp(
        problem=problem,
        basis=basis,
        training_set=training_set,
        tolerances=TOLERANCES,
        ctx=CTX,
        constraint_selection=preset,
    )

    weights = train_weights(training_lp)
    audit = audit_weights(
        problem=problem,
        basis=basis,
        training_set=training_set,
        weights=weights,
        tolerances=TOLERANCES,
        ctx=CTX,
        families=resolve_selection(preset, CTX.tau),
    )

    assert np.all(weights.rho >= 0)
    assert weights.rho.sum() <= problem.n_elements + 1e-8
    assert audit.passed, audit.residuals


def test_audit_detects_bad_weights():
    problem, basis, training_set = get_training_setup()

    audit = audit_weights(
        problem=problem,
        basis=basis,
        training_set=training_set,
        weights=EqpWeights(rho=np.zeros(problem.n_elements)),
        tolerances=TOLERANCES,
        ctx=CTX,
        families=[ConstraintFamily.DV, ConstraintFamily.RP],
    )

    assert not audit.passed
    assert np.isclose(
        audit.residuals[ConstraintFamily.DV], problem.total_volume
    )


def test_audit_of_unit_weights_passes_with_zero_tolerances():
    problem, basis, training_set = get_training_setup()

    audit = audit_weights(
        problem=problem,
        basis=basis,
        training_set=training_set,
        weights=EqpWeights.ones(problem.n_elements),
        tolerances=EqpTolerances(),
        ctx=CTX,
        families=list(ConstraintFamily),
    )

    assert audit.passed
    assert all(value == 0.0 for value in audit.residuals.values())


@pytest.mark.parametrize(
    "status", [LpStatus.INFEASIBLE, LpStatus.ITERATION_LIMIT]
)
def test_train_weights_falls_back_to_unit_weights(mocker, status):
    problem, basis, training_set = get_training_setup()
    training_lp = assemble_training_lp(
        problem=problem,
        basis=basis,
        training_set=training_set,
        tolerances=TOLERANCES,
        ctx=CTX,
        constraint_selection=EqpPreset.CONVERGENCE,
    )
    mocker.patch(
        "eqpal.methods.eqp.solve_lp",
        return_value=LpResult(
            x=np.zeros(training_lp.instance.n_rows),
            objective=np.nan,
            status=status,
            dual=np.zeros(problem.n_elements),
            iterations=3,
        ),
    )

    weights = train_weights(training_lp)

    assert np.array_equal(weights.rho, np.ones(problem.n_elements))


def test_train_weights_survives_singular_bases(mocker):
    problem, basis, training_set = get_training_setup()
    training_lp = assemble_training_lp(
        problem=problem,
        basis=basis,
        training_set=training_set,
        tolerances=TOLERANCES,
        ctx=CTX,
        constraint_selection=EqpPreset.CONVERGENCE,
    )
    mocker.patch(
        "eqpal.methods.eqp.solve_lp",
        side_effect=np.linalg.LinAlgError("singular"),
    )

    weights = train_weights(training_lp)

    assert weights.usage_fraction == 1.0


def test_weight_vector_conversions():
    assert weight_vector(None) is None
    assert np.array_equal(weight_vector(EqpWeights.ones(2)), [1.0, 1.0])
    assert np.array_equal(weight_vector([0.0, 2.0]), [0.0, 2.0])


def test_train_weights_finds_the_minimal_mass():
    training_lp = TrainingLp(
        instance=LpInstance(
            c=np.ones(2),
            A=np.array([[1.0, 1.0], [-1.0, -1.0]]),
            b=np.array([2.5, -1.5]),
        ),
        row_families=(ConstraintFamily.DV, ConstraintFamily.DV),
        n_elements=2,
    )

    weights = train_weights(training_lp)

    assert np.isclose(weights.rho.sum(), 1.5)
    assert np.all(weights.rho >= 0)


def test_train_weights_without_rows_drops_all_elements():
    training_lp = TrainingLp(
        instance=LpInstance(c=np.ones(3), A=np.zeros((0, 3)), b=np.zeros(0)),
        row_families=(),
        n_elements=3,
    )

    weights = train_weights(training_lp)

    assert np.array_equal(weights.rho, np.zeros(3))
    assert weights.usage_fraction == 0.0


def test_train_weights_falls_back_on_non_finite_duals(mocker):
    problem, basis, training_set = get_training_setup()
    training_lp = assemble_training_lp(
        problem=problem,
        basis=basis,
        training_set=training_set,
        tolerances=TOLERANCES,
        ctx=CTX,
        constraint_selection=EqpPreset.CONVERGENCE,
    )
    dual = np.full(problem.n_elements, -1.0)
    dual[0] = np.nan
    mocker.patch(
        "eqpal.methods.eqp.solve_lp",
        return_value=LpResult(
            x=np.zeros(training_lp.instance.n_rows),
            objective=-1.0,
            status=LpStatus.OPTIMAL,
            dual=dual,
            iterations=3,
        ),
    )

    weights = train_weights(training_lp)

    assert weights.usage_fraction == 1.0
    assert np.array_equal(weights.rho, np.ones(problem.n_elements))


def test_train_weights_falls_back_when_the_simplex_basis_degenerates(mocker):
    problem, basis, training_set = get_training_setup()
    training_lp = assemble_training_lp(
        problem=problem,
        basis=basis,
        training_set=training_set,
        tolerances=TOLERANCES,
        ctx=CTX,
        constraint_selection=EqpPreset.CONVERGENCE,
    )
    n_rows = problem.n_elements
    mocker.patch(
        "eqpal.methods.lp.scipy.linalg.lu_factor",
        return_value=(
            np.zeros((n_rows, n_rows)),
            np.arange(n_rows, dtype=np.int32),
        ),
    )

    weights = train_weights(training_lp)

    assert weights.usage_fraction == 1.0
