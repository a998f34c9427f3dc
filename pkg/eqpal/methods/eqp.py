"""Empirical quadrature: hyperreduced evaluation and weight training."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from aenum import Enum

from eqpal.data.problem import ALContext, Problem
from eqpal.data.reduced import (
    PENALTY_FAMILIES,
    ConstraintFamily,
    EqpTolerances,
    EqpWeights,
    ReducedBasis,
    ReducedSolution,
    TrainingPoint,
    TrainingSet,
)
from eqpal.methods.elemental_system import (
    active_elements,
    assemble_functionals,
    assemble_jacobians,
    assemble_residual,
    augmented_lagrangian,
    augmented_lagrangian_partials,
    gather_states,
)
from eqpal.methods.lp import LpInstance, LpStatus, solve_lp
from eqpal.methods.rom import (
    reduced_al_value_gradient,
    solve_reduced,
    solve_reduced_adjoint,
    solve_reduced_primal,
    solve_reduced_sensitivity,
)

log = logging.getLogger(__name__)

ZERO_WEIGHT_THRESHOLD = 1e-10
AUDIT_SLACK = 1e-9

WeightsLike = Union[EqpWeights, npt.NDArray[np.float64], None]


class EqpPreset(Enum):  # pylint: disable=too-few-public-methods
    """Predefined selections of EQP constraint families."""

    _init_ = "value __doc__"
    CONVERGENCE = "convergence", "families needed for global convergence"
    FULL = "full", "convergence families plus rs and lq"


PRESET_FAMILIES: Dict[EqpPreset, Tuple[ConstraintFamily, ...]] = {
    EqpPreset.CONVERGENCE: (
        ConstraintFamily.DV,
        ConstraintFamily.RP,
        ConstraintFamily.LRA,
        ConstraintFamily.LGA,
        ConstraintFamily.C,
        ConstraintFamily.DCMU,
        ConstraintFamily.DCY,
    ),
    EqpPreset.FULL: tuple(ConstraintFamily),
}


@dataclass(frozen=True)
class HyperBundle:  # pylint: disable=too-many-instance-attributes
    """Hyperreduced quantities at one reduced state.

    Attributes:
        value (float): augmented Lagrangian
        lagrangian (float): Lagrangian part j - theta^T c
        constraints (npt.NDArray[np.float64]): weighted constraint sums
        residual (npt.NDArray[np.float64]): reduced primal residual
        adjoint_residual (npt.NDArray[np.float64]): Lagrangian part of the
            reduced adjoint residual
        adjoint_gradient (npt.NDArray[np.float64]): Lagrangian part of the
            adjoint gradient
        sensitivity_residual (npt.NDArray[np.float64]): reduced sensitivity
            residual (n x N_mu)
        dc_dmu (npt.NDArray[np.float64]): partial dc/dmu (N_c x N_mu)
        dc_dy (npt.NDArray[np.float64]): partial dc/dy (N_c x n)
        volume (float): weighted domain volume
    """

    value: float
    lagrangian: float
    constraints: npt.NDArray[np.float64]
    residual: npt.NDArray[np.float64]
    adjoint_residual: npt.NDArray[np.float64]
    adjoint_gradient: npt.NDArray[np.float64]
    sensitivity_residual: npt.NDArray[np.float64]
    dc_dmu: npt.NDArray[np.float64]
    dc_dy: npt.NDArray[np.float64]
    volume: float

    def family_values(self) -> Dict[ConstraintFamily, npt.NDArray[np.float64]]:
        """Flattened quantity controlled by each constraint family."""
        return {
            ConstraintFamily.DV: np.array([self.volume]),
            ConstraintFamily.RP: self.residual.ravel(),
            ConstraintFamily.LRA: self.adjoint_residual.ravel(),
            ConstraintFamily.LGA: self.adjoint_gradient.ravel(),
            ConstraintFamily.C: self.constraints.ravel(),
            ConstraintFamily.DCMU: self.dc_dmu.ravel(),
            ConstraintFamily.DCY: self.dc_dy.ravel(),
            ConstraintFamily.RS: self.sensitivity_residual.ravel(),
            ConstraintFamily.LQ: np.array([self.lagrangian]),
        }


@dataclass(frozen=True)
class TrainingLp:
    """EQP training problem min 1^T rho s.t. two-sided accuracy rows.

    Attributes:
        instance (LpInstance): rows [A; -A] rho <= [b + d; -b + d]
        row_families (Tuple[ConstraintFamily, ...]): family of each row
        n_elements (int): number of weights
    """

    instance: LpInstance
    row_families: Tuple[ConstraintFamily, ...]
    n_elements: int

    def rows_of(self, family: ConstraintFamily) -> int:
        """Number of LP rows contributed by a family."""
        return sum(1 for row in self.row_families if row == family)


@dataclass(frozen=True)
class EqpAudit:
    """Post-solve check of trained weights.

    Attributes:
        residuals (Dict[ConstraintFamily, float]): largest deviation between
            hyperreduced and reduced quantity per family
        limits (Dict[ConstraintFamily, float]): admissible deviation per
            family
    """

    residuals: Dict[ConstraintFamily, float]
    limits: Dict[ConstraintFamily, float]

    @property
    def passed(self) -> bool:
        """Whether every family stays within its limit."""
        return all(
            self.residuals[family] <= self.limits[family]
            for family in self.residuals
        )


def resolve_selection(
    selection: Union[EqpPreset, Iterable[ConstraintFamily]], tau: float
) -> Tuple[ConstraintFamily, ...]:
    """Constraint families to train with.

    Presets drop the constraint families scaled by 1/tau if tau = 0, an
    explicit selection of such a family with tau = 0 is rejected.

    Args:
        selection: preset or explicit families
        tau (float): penalty parameter

    Returns:
        families in canonical order
    """
    if isinstance(selection, EqpPreset):
        families = set(PRESET_FAMILIES[selection])
        if tau == 0:
            families -= set(PENALTY_FAMILIES)
    else:
        families = set(selection)
        if tau == 0 and families & set(PENALTY_FAMILIES):
            raise ValueError(
                "constraint families c, dcmu and dcy are undefined for a "
                "zero penalty parameter."
            )
    return tuple(family for family in ConstraintFamily if family in families)


def hyper_evaluate(
    *,
    problem: Problem,
    basis: ReducedBasis,
    weights: WeightsLike,
    y_tilde: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
    lambda_tilde: Optional[npt.NDArray[np.float64]] = None,
    sens_tilde: Optional[npt.NDArray[np.float64]] = None,
) -> HyperBundle:
    """Evaluate all hyperreduced quantities at a reduced state.

    Only elements with positive weight are visited. With unit weights every
    quantity equals its reduced counterpart.

    Args:
        problem (Problem): full system
        basis (ReducedBasis): reduced basis
        weights: element weights, None for the unreduced element sum
        y_tilde (npt.NDArray[np.float64]): reduced state
        mu (npt.NDArray[np.float64]): parameter vector
        ctx (ALContext): multiplier estimate and penalty
        lambda_tilde (Optional[npt.NDArray[np.float64]]): reduced adjoint
            entering the adjoint residual and gradient, zero if None
        sens_tilde (Optional[npt.NDArray[np.float64]]): reduced sensitivity
            entering the sensitivity residual, zero if None

    Returns:
        bundle of hyperreduced quantities
    """
    rho = weight_vector(weights)
    y_tilde = np.asarray(y_tilde, dtype=float)
    if y_tilde.shape != (basis.size,):
        raise ValueError(
            f"reduced state has shape {y_tilde.shape}, expected "
            f"({basis.size},)."
        )
    phi = basis.columns
    u = basis.reconstruct(y_tilde)
    lambda_tilde = (
        np.zeros(basis.size) if lambda_tilde is None else lambda_tilde
    )
    sens_tilde = (
        np.zeros((basis.size, problem.n_params))
        if sens_tilde is None
        else sens_tilde
    )

    residual = assemble_residual(problem=problem, u=u, mu=mu, weights=rho)
    jac_u, jac_mu = assemble_jacobians(problem=problem, u=u, mu=mu, weights=rho)
    functionals = assemble_functionals(
        problem=problem, u=u, mu=mu, weights=rho
    )
    jac_hat = phi.T @ jac_u @ phi
    jac_mu_hat = phi.T @ jac_mu
    value, lagrangian = augmented_lagrangian(functionals=functionals, ctx=ctx)
    ell_u, ell_mu = augmented_lagrangian_partials(
        functionals=functionals, ctx=ctx, penalty=False
    )
    elements, factors = active_elements(problem=problem, weights=rho)

    return HyperBundle(
        value=value,
        lagrangian=lagrangian,
        constraints=functionals.constraints,
        residual=phi.T @ residual,
        adjoint_residual=jac_hat.T @ lambda_tilde - phi.T @ ell_u,
        adjoint_gradient=ell_mu - jac_mu_hat.T @ lambda_tilde,
        sensitivity_residual=jac_hat @ sens_tilde + jac_mu_hat,
        dc_dmu=functionals.constraints_mu,
        dc_dy=functionals.constraints_u @ phi,
        volume=float(np.sum(factors * problem.volumes[elements])),
    )


def solve_hyper_primal(
    *,
    problem: Problem,
    basis: ReducedBasis,
    weights: WeightsLike,
    mu: npt.NDArray[np.float64],
    y_guess: Optional[npt.NDArray[np.float64]] = None,
) -> npt.NDArray[np.float64]:
    """Solve the weighted reduced primal equations."""
    return solve_reduced_primal(
        problem=problem,
        basis=basis,
        mu=mu,
        weights=weight_vector(weights),
        y_guess=y_guess,
    )


def solve_hyper_adjoint(
    *,
    problem: Problem,
    basis: ReducedBasis,
    weights: WeightsLike,
    y_tilde: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
) -> npt.NDArray[np.float64]:
    """Solve the weighted reduced adjoint equations."""
    return solve_reduced_adjoint(
        problem=problem,
        basis=basis,
        y_hat=y_tilde,
        mu=mu,
        ctx=ctx,
        weights=weight_vector(weights),
    )


def solve_hyper_sensitivity(
    *,
    problem: Problem,
    basis: ReducedBasis,
    weights: WeightsLike,
    y_tilde: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """Solve the weighted reduced sensitivity equations."""
    return solve_reduced_sensitivity(
        problem=problem,
        basis=basis,
        y_hat=y_tilde,
        mu=mu,
        weights=weight_vector(weights),
    )


def solve_hyper(
    *,
    problem: Problem,
    basis: ReducedBasis,
    weights: WeightsLike,
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
) -> ReducedSolution:
    """Weighted reduced primal, adjoint and sensitivity solution."""
    return solve_reduced(
        problem=problem,
        basis=basis,
        mu=mu,
        ctx=ctx,
        weights=weight_vector(weights),
    )


def hyper_f_and_gradient(
    *,
    problem: Problem,
    basis: ReducedBasis,
    weights: WeightsLike,
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
    y_guess: Optional[npt.NDArray[np.float64]] = None,
) -> Tuple[float, npt.NDArray[np.float64]]:
    """Hyperreduced AL value and its adjoint gradient."""
    return reduced_al_value_gradient(
        problem=problem,
        basis=basis,
        mu=mu,
        ctx=ctx,
        weights=weight_vector(weights),
        y_guess=y_guess,
    )


def build_training_set(
    *,
    problem: Problem,
    basis: ReducedBasis,
    mus: Sequence[npt.NDArray[np.float64]],
    ctx: ALContext,
) -> TrainingSet:
    """Training set of reduced solutions, the first point is the center."""
    return TrainingSet(
        points=tuple(
            TrainingPoint(
                mu=np.array(mu, dtype=float),
                solution=solve_reduced(
                    problem=problem, basis=basis, mu=mu, ctx=ctx
                ),
            )
            for mu in mus
        )
    )


def element_contributions(  # pylint: disable=too-many-locals
    *,
    problem: Problem,
    basis: ReducedBasis,
    mu: npt.NDArray[np.float64],
    solution: ReducedSolution,
    ctx: ALContext,
    families: Sequence[ConstraintFamily],
) -> Dict[ConstraintFamily, npt.NDArray[np.float64]]:
    """Per-element contributions to the hyperreduced quantities.

    Every hyperreduced quantity at a frozen reduced solution is linear in
    the weights, column e of each returned matrix holds the contribution of
    element e with unit weight.

    Args:
        problem (Problem): full system
        basis (ReducedBasis): reduced basis
        mu (npt.NDArray[np.float64]): training parameter
        solution (ReducedSolution): reduced solution at mu
        ctx (ALContext): multiplier estimate and penalty
        families (Sequence[ConstraintFamily]): requested families

    Returns:
        contribution matrix (rows x N_e) per family
    """
    kernel = problem.kernel
    elements = np.arange(problem.n_elements)
    phi = basis.columns
    u = basis.reconstruct(solution.y_hat)
    u_e, u_n = gather_states(problem=problem, u=u, elements=elements)
    theta = ctx.theta

    neighbors = problem.neighbor_dofs
    has_neighbor = neighbors >= 0
    phi_e = phi[problem.element_dofs]
    phi_n = np.where(
        has_neighbor[:, :, None], phi[np.maximum(neighbors, 0)], 0.0
    )

    residual = kernel.residual(elements=elements, u_e=u_e, u_n=u_n, mu=mu)
    d_own, d_neighbor, d_mu = kernel.residual_derivatives(
        elements=elements, u_e=u_e, u_n=u_n, mu=mu
    )
    d_neighbor = np.where(has_neighbor[:, None, :], d_neighbor, 0.0)
    objective = kernel.objective(elements=elements, u_e=u_e, mu=mu)
    dj_u, dj_mu = kernel.objective_derivatives(
        elements=elements, u_e=u_e, mu=mu
    )
    constraints = kernel.constraints(elements=elements, u_e=u_e, mu=mu)
    dc_u, dc_mu = kernel.constraint_derivatives(
        elements=elements, u_e=u_e, mu=mu
    )

    jac_hat = np.einsum("ekn,ekl,elm->enm", phi_e, d_own, phi_e) + np.einsum(
        "ekn,ekl,elm->enm", phi_e, d_neighbor, phi_n
    )
    jac_mu_hat = np.einsum("ekn,ekp->enp", phi_e, d_mu)
    lagrangian_u = dj_u - np.einsum("eck,c->ek", dc_u, theta)
    lagrangian_mu = dj_mu - np.einsum("ecp,c->ep", dc_mu, theta)

    contributions = {}
    for family in families:
        if family == ConstraintFamily.DV:
            values = problem.volumes[:, None]
        elif family == ConstraintFamily.RP:
            values = np.einsum("ekn,ek->en", phi_e, residual)
        elif family == ConstraintFamily.LRA:
            values = np.einsum(
                "enm,n->em", jac_hat, solution.lambda_hat
            ) - np.einsum("ekn,ek->en", phi_e, lagrangian_u)
        elif family == ConstraintFamily.LGA:
            values = lagrangian_mu - np.einsum(
                "enp,n->ep", jac_mu_hat, solution.lambda_hat
            )
        elif family == ConstraintFamily.C:
            values = constraints
        elif family == ConstraintFamily.DCMU:
            values = dc_mu.reshape(problem.n_elements, -1)
        elif family == ConstraintFamily.DCY:
            values = np.einsum("eck,ekn->ecn", dc_u, phi_e).reshape(
                problem.n_elements, -1
            )
        elif family == ConstraintFamily.RS:
            values = (
                np.einsum("enm,mp->enp", jac_hat, solution.sens_hat)
                + jac_mu_hat
            ).reshape(problem.n_elements, -1)
        else:
            values = (objective - constraints @ theta)[:, None]
        contributions[family] = np.asarray(values, dtype=float).T
    return contributions


def family_tolerance(
    family: ConstraintFamily, tolerances: EqpTolerances, tau: float
) -> float:
    """Admissible deviation of a family, the penalty families use delta/tau."""
    delta = tolerances.for_family(family)
    if family in PENALTY_FAMILIES:
        if tau <= 0:
            raise ValueError(
                f"family {family.value} needs a positive penalty parameter."
            )
        return delta / tau
    return delta


def assemble_training_lp(
    *,
    problem: Problem,
    basis: ReducedBasis,
    training_set: TrainingSet,
    tolerances: EqpTolerances,
    ctx: ALContext,
    constraint_selection: Union[EqpPreset, Iterable[ConstraintFamily]],
) -> TrainingLp:
    """Assemble the EQP training linear program.

    For every training parameter and selected family each component of the
    controlled quantity contributes the two rows a^T rho <= b + delta and
    -a^T rho <= -b + delta, where b is the unit-weight value.

    Args:
        problem (Problem): full system
        basis (ReducedBasis): reduced basis
        training_set (TrainingSet): parameters with reduced solutions
        tolerances (EqpTolerances): family tolerances
        ctx (ALContext): multiplier estimate and penalty
        constraint_selection: preset or explicit families

    Returns:
        training LP, feasible for unit weights
    """
    if isinstance(constraint_selection, EqpPreset):
        families = resolve_selection(constraint_selection, ctx.tau)
    else:
        families = resolve_selection(list(constraint_selection), ctx.tau)

    blocks = []
    rhs = []
    row_families = []
    for point in training_set.points:
        contributions = element_contributions(
            problem=problem,
            basis=basis,
            mu=point.mu,
            solution=point.solution,
            ctx=ctx,
            families=families,
        )
        for family in families:
            matrix = contributions[family]
            target = matrix.sum(axis=1)
            delta = family_tolerance(family, tolerances, ctx.tau)
            blocks.extend([matrix, -matrix])
            rhs.extend([target + delta, -target + delta])
            row_families.extend([family] * (2 * matrix.shape[0]))

    n_elements = problem.n_elements
    instance = LpInstance(
        c=np.ones(n_elements),
        A=np.vstack(blocks) if blocks else np.zeros((0, n_elements)),
        b=np.concatenate(rhs) if rhs else np.zeros(0),
    )
    slack = instance.b - instance.A @ np.ones(n_elements)
    assert np.all(
        slack >= -AUDIT_SLACK * np.maximum(1.0, np.abs(instance.b))
    ), f"unit weights violate the training LP by {-slack.min():.3e}"
    return TrainingLp(
        instance=instance,
        row_families=tuple(row_families),
        n_elements=n_elements,
    )


def train_weights(training_lp: TrainingLp) -> EqpWeights:
    """Solve the training LP for sparse element weights.

    Rows without coefficients are dropped and every row is scaled by its
    largest coefficient. The LP is solved through its dual
    max -h^T y s.t. -G^T y <= 1, y >= 0, for which the slack basis is
    feasible, the weights are the optimal dual multipliers. Weights below
    1e-10 are set to zero. If the solver fails, unit weights are returned.

    Args:
        training_lp (TrainingLp): assembled training problem

    Returns:
        trained weights
    """
    instance = training_lp.instance
    n_elements = training_lp.n_elements
    scale = np.max(np.abs(instance.A), axis=1, initial=0.0)
    keep = scale > 0
    rows = instance.A[keep] / scale[keep, None]
    rhs = instance.b[keep] / scale[keep]

    dual = LpInstance(c=rhs, A=-rows.T, b=np.ones(n_elements))
    try:
        result = solve_lp(dual)
    except np.linalg.LinAlgError as error:
        log.warning(f"EQP training failed ({error}), using unit weights.")
        return EqpWeights.ones(n_elements)
    if result.status != LpStatus.OPTIMAL:
        log.warning(
            f"EQP training ended with status {result.status.value}, "
            "using unit weights."
        )
        return EqpWeights.ones(n_elements)
    if not np.all(np.isfinite(result.dual)):
        log.warning(
            "EQP training returned non-finite duals, using unit weights."
        )
        return EqpWeights.ones(n_elements)

    rho = np.maximum(-result.dual, 0.0)
    rho[rho < ZERO_WEIGHT_THRESHOLD] = 0.0
    weights = EqpWeights(rho=rho)
    log.debug(
        f"EQP weights use {weights.active_set.size} of {n_elements} elements "
        f"after {result.iterations} pivots."
    )
    return weights


def audit_weights(
    *,
    problem: Problem,
    basis: ReducedBasis,
    training_set: TrainingSet,
    weights: WeightsLike,
    tolerances: EqpTolerances,
    ctx: ALContext,
    families: Sequence[ConstraintFamily],
) -> EqpAudit:
    """Re-check trained weights against the reduced quantities.

    The check evaluates :func:`hyper_evaluate` with the weights and with unit
    weights, independent of the LP matrices.

    Args:
        problem (Problem): full system
        basis (ReducedBasis): reduced basis
        training_set (TrainingSet): parameters with reduced solutions
        weights: weights to check
        tolerances (EqpTolerances): family tolerances
        ctx (ALContext): multiplier estimate and penalty
        families (Sequence[ConstraintFamily]): families to check

    Returns:
        largest deviation and admissible limit per family
    """
    residuals = {family: 0.0 for family in families}
    scales = {family: 0.0 for family in families}
    for point in training_set.points:
        arguments = {
            "problem": problem,
            "basis": basis,
            "y_tilde": point.solution.y_hat,
            "mu": point.mu,
            "ctx": ctx,
            "lambda_tilde": point.solution.lambda_hat,
            "sens_tilde": point.solution.sens_hat,
        }
        reduced = hyper_evaluate(
            weights=EqpWeights.ones(problem.n_elements), **arguments
        ).family_values()
        hyper = hyper_evaluate(weights=weights, **arguments).family_values()
        for family in families:
            deviation = np.abs(reduced[family] - hyper[family])
            if deviation.size > 0:
                residuals[family] = max(
                    residuals[family], float(deviation.max())
                )
                scales[family] = max(
                    scales[family], float(np.abs(reduced[family]).max())
                )

    limits = {
        family: family_tolerance(family, tolerances, ctx.tau)
        + AUDIT_SLACK * max(1.0, scales[family])
        for family in families
    }
    return EqpAudit(residuals=residuals, limits=limits)


def weight_vector(weights: WeightsLike) -> Optional[npt.NDArray[np.float64]]:
    """Plain weight array of EqpWeights, arrays or None."""
    if weights is None:
        return None
    if isinstance(weights, EqpWeights):
        return weights.rho
    return np.asarray(weights, dtype=float)
