"""Galerkin reduced-order models: basis construction and reduced solves.

All reduced operators accept optional element weights. Without weights the
Galerkin ROM is evaluated, with weights its hyperreduced counterpart.
"""

from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
import scipy.linalg

from eqpal.data.problem import ALContext, Problem
from eqpal.data.reduced import ReducedBasis, ReducedSolution
from eqpal.methods.elemental_system import (
    NEWTON_TOLERANCE,
    assemble_functionals,
    assemble_jacobians,
    assemble_residual,
    augmented_lagrangian,
    augmented_lagrangian_partials,
    lu_solve_checked,
    newton_solve,
)

log = logging.getLogger(__name__)

GRAM_SCHMIDT_DROP_TOLERANCE = 1e-10
POD_TRUNCATION = 1e-12


class EmptyBasisError(ValueError):
    """Raised if no column survives the orthogonalization."""


def gram_schmidt(
    columns: Union[Sequence[npt.NDArray[np.float64]], npt.NDArray[np.float64]],
    *,
    tags: Optional[Sequence[str]] = None,
    offset: Optional[npt.NDArray[np.float64]] = None,
) -> ReducedBasis:
    """Orthonormalize columns with modified Gram-Schmidt.

    Every column is orthogonalized twice against the accepted ones. Columns
    whose remaining norm falls below 1e-10 times their original norm are
    dropped together with their tag.

    Args:
        columns: candidate columns, a sequence of vectors or a matrix whose
            columns are the candidates
        tags (Optional[Sequence[str]]): provenance tag per candidate
        offset (Optional[npt.NDArray[np.float64]]): affine offset of the
            resulting basis

    Returns:
        orthonormal basis of the span of the candidates
    """
    candidates = _as_columns(columns)
    if tags is None:
        tags = [""] * len(candidates)
    if len(tags) != len(candidates):
        raise ValueError(
            f"got {len(tags)} tags for {len(candidates)} candidate columns."
        )

    accepted = []
    accepted_tags = []
    for column, tag in zip(candidates, tags):
        vector = np.array(column, dtype=float)
        original_norm = float(np.linalg.norm(vector))
        if original_norm == 0.0 or not np.isfinite(original_norm):
            continue
        for _ in range(2):
            for basis_vector in accepted:
                vector -= (basis_vector @ vector) * basis_vector
        norm = float(np.linalg.norm(vector))
        if norm < GRAM_SCHMIDT_DROP_TOLERANCE * original_norm:
            continue
        accepted.append(vector / norm)
        accepted_tags.append(tag)

    if not accepted:
        raise EmptyBasisError("all candidate columns are degenerate.")
    log.debug(
        f"Gram-Schmidt kept {len(accepted)} of {len(candidates)} columns."
    )
    return ReducedBasis(
        columns=np.stack(accepted, axis=1),
        offset=offset,
        tags=tuple(accepted_tags),
    )


def pod_decomposition(
    snapshots: npt.NDArray[np.float64],
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Left singular vectors and singular values of a snapshot matrix.

    Singular values below 1e-12 times the largest one are truncated.

    Args:
        snapshots (npt.NDArray[np.float64]): snapshot matrix (N_u x m)

    Returns:
        Tuple of the retained left singular vectors and singular values
    """
    snapshots = np.asarray(snapshots, dtype=float)
    if snapshots.ndim != 2:
        raise ValueError(
            f"snapshots must be a matrix, got {snapshots.ndim} dimensions."
        )
    if snapshots.shape[1] == 0:
        return np.zeros((snapshots.shape[0], 0)), np.zeros(0)

    vectors, values, _ = scipy.linalg.svd(snapshots, full_matrices=False)
    if values.size == 0 or values[0] == 0.0:
        return np.zeros((snapshots.shape[0], 0)), np.zeros(0)
    keep = values >= POD_TRUNCATION * values[0]
    return vectors[:, keep], values[keep]


def pod(
    snapshots: npt.NDArray[np.float64], k: int
) -> npt.NDArray[np.float64]:
    """Leading k POD modes of the snapshots.

    Args:
        snapshots (npt.NDArray[np.float64]): snapshot matrix (N_u x m)
        k (int): number of requested modes

    Returns:
        N_u x min(k, rank) matrix of POD modes
    """
    if k < 0:
        raise ValueError(f"number of POD modes must be nonnegative, got {k}.")
    vectors, _ = pod_decomposition(snapshots)
    return vectors[:, :k]


def projection_error(
    basis: npt.NDArray[np.float64], snapshots: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """Norm of the orthogonal projection error of every snapshot."""
    residual = snapshots - basis @ (basis.T @ snapshots)
    return np.asarray(np.linalg.norm(residual, axis=0))


def reduced_residual(
    *,
    problem: Problem,
    basis: ReducedBasis,
    y: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    weights: Optional[npt.NDArray[np.float64]] = None,
) -> npt.NDArray[np.float64]:
    """Galerkin residual Phi^T r(offset + Phi y, mu)."""
    residual = assemble_residual(
        problem=problem, u=basis.reconstruct(y), mu=mu, weights=weights
    )
    return np.asarray(basis.columns.T @ residual)


def reduced_jacobians(
    *,
    problem: Problem,
    basis: ReducedBasis,
    y: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    weights: Optional[npt.NDArray[np.float64]] = None,
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Reduced Jacobians Phi^T dr/du Phi and Phi^T dr/dmu."""
    jac_u, jac_mu = assemble_jacobians(
        problem=problem, u=basis.reconstruct(y), mu=mu, weights=weights
    )
    phi = basis.columns
    return phi.T @ jac_u @ phi, phi.T @ jac_mu


def solve_reduced_primal(
    *,
    problem: Problem,
    basis: ReducedBasis,
    mu: npt.NDArray[np.float64],
    weights: Optional[npt.NDArray[np.float64]] = None,
    y_guess: Optional[npt.NDArray[np.float64]] = None,
    newton_tol: float = NEWTON_TOLERANCE,
) -> npt.NDArray[np.float64]:
    """Solve Phi^T r(offset + Phi y, mu) = 0 with Newton's method.

    Args:
        problem (Problem): full system
        basis (ReducedBasis): reduced basis, non-empty
        mu (npt.NDArray[np.float64]): parameter vector
        weights (Optional[npt.NDArray[np.float64]]): element weights
        y_guess (Optional[npt.NDArray[np.float64]]): initial guess, zero
            (the offset state) if None
        newton_tol (float): tolerance on the reduced residual

    Returns:
        reduced coordinates of the solution
    """
    if basis.size == 0:
        raise ValueError("reduced solves need a non-empty basis.")
    guess = np.zeros(basis.size) if y_guess is None else y_guess
    result = newton_solve(
        residual=lambda y: reduced_residual(
            problem=problem, basis=basis, y=y, mu=mu, weights=weights
        ),
        jacobian=lambda y: reduced_jacobians(
            problem=problem, basis=basis, y=y, mu=mu, weights=weights
        )[0],
        x0=guess,
        tol=newton_tol,
    )
    return result.x


def solve_reduced_adjoint(
    *,
    problem: Problem,
    basis: ReducedBasis,
    y_hat: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
    weights: Optional[npt.NDArray[np.float64]] = None,
) -> npt.NDArray[np.float64]:
    """Solve (Phi^T dr/du Phi)^T lambda = Phi^T (dl/du)^T.

    Args:
        problem (Problem): full system
        basis (ReducedBasis): reduced basis
        y_hat (npt.NDArray[np.float64]): reduced primal solution
        mu (npt.NDArray[np.float64]): parameter vector
        ctx (ALContext): multiplier estimate and penalty
        weights (Optional[npt.NDArray[np.float64]]): element weights

    Returns:
        reduced adjoint
    """
    u = basis.reconstruct(y_hat)
    jac_hat, _ = reduced_jacobians(
        problem=problem, basis=basis, y=y_hat, mu=mu, weights=weights
    )
    functionals = assemble_functionals(
        problem=problem, u=u, mu=mu, weights=weights
    )
    ell_u, _ = augmented_lagrangian_partials(functionals=functionals, ctx=ctx)
    return np.asarray(
        scipy.linalg.solve(jac_hat.T, basis.columns.T @ ell_u), dtype=float
    )


def solve_reduced_sensitivity(
    *,
    problem: Problem,
    basis: ReducedBasis,
    y_hat: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    weights: Optional[npt.NDArray[np.float64]] = None,
) -> npt.NDArray[np.float64]:
    """Solve (Phi^T dr/du Phi) w = -Phi^T dr/dmu for all parameters."""
    jac_hat, jac_mu_hat = reduced_jacobians(
        problem=problem, basis=basis, y=y_hat, mu=mu, weights=weights
    )
    return lu_solve_checked(jac_hat, -jac_mu_hat)


def solve_reduced(
    *,
    problem: Problem,
    basis: ReducedBasis,
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
    weights: Optional[npt.NDArray[np.float64]] = None,
    sensitivity: bool = True,
) -> ReducedSolution:
    """Reduced primal, adjoint and (optionally) sensitivity solution."""
    y_hat = solve_reduced_primal(
        problem=problem, basis=basis, mu=mu, weights=weights
    )
    lambda_hat = solve_reduced_adjoint(
        problem=problem,
        basis=basis,
        y_hat=y_hat,
        mu=mu,
        ctx=ctx,
        weights=weights,
    )
    sens_hat = (
        solve_reduced_sensitivity(
            problem=problem, basis=basis, y_hat=y_hat, mu=mu, weights=weights
        )
        if sensitivity
        else np.zeros((basis.size, problem.n_params))
    )
    return ReducedSolution(
        y_hat=y_hat, lambda_hat=lambda_hat, sens_hat=sens_hat
    )


def reduced_al_value_gradient(
    *,
    problem: Problem,
    basis: ReducedBasis,
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
    weights: Optional[npt.NDArray[np.float64]] = None,
    y_guess: Optional[npt.NDArray[np.float64]] = None,
) -> Tuple[float, npt.NDArray[np.float64]]:
    """Value and adjoint gradient of the reduced augmented Lagrangian.

    Args:
        problem (Problem): full system
        basis (ReducedBasis): reduced basis
        mu (npt.NDArray[np.float64]): parameter vector
        ctx (ALContext): multiplier estimate and penalty
        weights (Optional[npt.NDArray[np.float64]]): element weights
        y_guess (Optional[npt.NDArray[np.float64]]): reduced Newton guess

    Returns:
        Tuple of the reduced AL value and its gradient
    """
    y_hat = solve_reduced_primal(
        problem=problem, basis=basis, mu=mu, weights=weights, y_guess=y_guess
    )
    return reduced_value_gradient_at(
        problem=problem,
        basis=basis,
        y_hat=y_hat,
        mu=mu,
        ctx=ctx,
        weights=weights,
    )


def reduced_value_gradient_at(
    *,
    problem: Problem,
    basis: ReducedBasis,
    y_hat: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
    weights: Optional[npt.NDArray[np.float64]] = None,
) -> Tuple[float, npt.NDArray[np.float64]]:
    """Reduced AL value and gradient at a given reduced primal solution."""
    u = basis.reconstruct(y_hat)
    jac_hat, jac_mu_hat = reduced_jacobians(
        problem=problem, basis=basis, y=y_hat, mu=mu, weights=weights
    )
    functionals = assemble_functionals(
        problem=problem, u=u, mu=mu, weights=weights
    )
    value, _ = augmented_lagrangian(functionals=functionals, ctx=ctx)
    ell_u, ell_mu = augmented_lagrangian_partials(
        functionals=functionals, ctx=ctx
    )
    lambda_hat = scipy.linalg.solve(jac_hat.T, basis.columns.T @ ell_u)
    return value, ell_mu - jac_mu_hat.T @ lambda_hat


def _as_columns(
    columns: Union[Sequence[npt.NDArray[np.float64]], npt.NDArray[np.float64]]
) -> List[npt.NDArray[np.float64]]:
    if isinstance(columns, np.ndarray):
        if columns.ndim == 1:
            return [columns]
        return [columns[:, index] for index in range(columns.shape[1])]
    return list(columns)
