"""Assembly and high-dimensional solves of element-decomposable systems."""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg

from eqpal.data.problem import ALContext, PrimalAdjointPair, Problem

log = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-12
MAX_NEWTON_ITERATIONS = 50
MAX_STEP_HALVINGS = 20

_CachedState = Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]
_AdjointKey = Tuple[bytes, bytes, float]


class SolverError(RuntimeError):
    """Raised if a nonlinear solve does not converge.

    Attributes:
        residual_norm (float): infinity norm of the last residual
        iterations (int): number of performed Newton iterations
    """

    def __init__(self, message: str, *, residual_norm: float, iterations: int):
        """Create a solver error.

        Args:
            message (str): description of the failure
            residual_norm (float): infinity norm of the last residual
            iterations (int): number of performed Newton iterations
        """
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass(frozen=True)
class NewtonResult:
    """Outcome of a Newton solve.

    Attributes:
        x (npt.NDArray[np.float64]): converged solution
        iterations (int): number of Newton steps taken
        residual_norm (float): infinity norm of the final residual
    """

    x: npt.NDArray[np.float64]
    iterations: int
    residual_norm: float


@dataclass(frozen=True)
class Functionals:
    """Assembled objective and side constraints with their partials.

    Attributes:
        objective (float): j
        objective_u (npt.NDArray[np.float64]): dj/du, shape (N_u,)
        objective_mu (npt.NDArray[np.float64]): dj/dmu, shape (N_mu,)
        constraints (npt.NDArray[np.float64]): c, shape (N_c,)
        constraints_u (npt.NDArray[np.float64]): dc/du, shape (N_c, N_u)
        constraints_mu (npt.NDArray[np.float64]): dc/dmu, shape (N_c, N_mu)
    """

    objective: float
    objective_u: npt.NDArray[np.float64]
    objective_mu: npt.NDArray[np.float64]
    constraints: npt.NDArray[np.float64]
    constraints_u: npt.NDArray[np.float64]
    constraints_mu: npt.NDArray[np.float64]


def newton_solve(
    *,
    residual: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]],
    jacobian: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]],
    x0: npt.NDArray[np.float64],
    tol: float = NEWTON_TOLERANCE,
    max_iters: int = MAX_NEWTON_ITERATIONS,
) -> NewtonResult:
    """Damped Newton iteration on a dense system.

    Each step solves the Jacobian system with LU and partial pivoting and
    halves the step (at most 20 times) until the infinity norm of the
    residual decreases. If no halving decreases the residual, the full step
    is taken.

    Args:
        residual (Callable): maps x to the residual vector
        jacobian (Callable): maps x to the dense Jacobian
        x0 (npt.NDArray[np.float64]): initial guess
        tol (float): convergence tolerance on the infinity norm
        max_iters (int): maximal number of Newton steps

    Returns:
        Newton result with the converged solution
    """
    x = np.array(x0, dtype=float)
    res = residual(x)
    norm = _max_abs(res)
    iterations = 0

    while norm > tol:
        if iterations >= max_iters or not np.isfinite(norm):
            raise SolverError(
                f"Newton did not converge within {iterations} iterations, "
                f"last residual norm {norm:.3e}.",
                residual_norm=norm,
                iterations=iterations,
            )
        step = scipy.linalg.solve(jacobian(x), -res)

        length = 1.0
        for _ in range(MAX_STEP_HALVINGS + 1):
            trial = x + length * step
            trial_res = residual(trial)
            trial_norm = _max_abs(trial_res)
            if trial_norm < norm:
                break
            length *= 0.5
        else:
            log.warning(
                f"line search did not decrease the residual {norm:.3e}, "
                "taking the full Newton step."
            )
            trial = x + step
            trial_res = residual(trial)
            trial_norm = _max_abs(trial_res)

        x, res, norm = trial, trial_res, trial_norm
        iterations += 1

    log.debug(f"Newton converged in {iterations} iterations ({norm:.3e}).")
    return NewtonResult(x=x, iterations=iterations, residual_norm=norm)


def assemble_residual(
    *,
    problem: Problem,
    u: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    weights: Optional[npt.NDArray[np.float64]] = None,
) -> npt.NDArray[np.float64]:
    """Assemble the (optionally weighted) global residual.

    Computes sum_e rho_e P_e r_e(P_e^T u, P_e'^T u, mu). Without weights all
    elements contribute with weight one, with weights only elements with
    rho_e > 0 are evaluated.

    Args:
        problem (Problem): system to assemble
        u (npt.NDArray[np.float64]): state vector
        mu (npt.NDArray[np.float64]): parameter vector
        weights (Optional[npt.NDArray[np.float64]]): element weights rho

    Returns:
        assembled residual vector
    """
    problem.check_state(u)
    problem.check_params(mu)
    elements, factors = active_elements(problem=problem, weights=weights)

    residual = np.zeros(problem.n_state)
    if elements.size == 0:
        return residual

    u_e, u_n = gather_states(problem=problem, u=u, elements=elements)
    r_e = problem.kernel.residual(elements=elements, u_e=u_e, u_n=u_n, mu=mu)
    _scatter_add(
        residual,
        problem.element_dofs[elements],
        factors[:, None] * r_e,
    )
    return residual


def assemble_jacobians(
    *,
    problem: Problem,
    u: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    weights: Optional[npt.NDArray[np.float64]] = None,
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Assemble the dense Jacobians dr/du and dr/dmu.

    Args:
        problem (Problem): system to assemble
        u (npt.NDArray[np.float64]): state vector
        mu (npt.NDArray[np.float64]): parameter vector
        weights (Optional[npt.NDArray[np.float64]]): element weights rho

    Returns:
        Tuple of dr/du (N_u x N_u) and dr/dmu (N_u x N_mu)
    """
    problem.check_state(u)
    problem.check_params(mu)
    elements, factors = active_elements(problem=problem, weights=weights)

    jac_u = np.zeros((problem.n_state, problem.n_state))
    jac_mu = np.zeros((problem.n_state, problem.n_params))
    if elements.size == 0:
        return jac_u, jac_mu

    u_e, u_n = gather_states(problem=problem, u=u, elements=elements)
    d_own, d_neighbor, d_mu = problem.kernel.residual_derivatives(
        elements=elements, u_e=u_e, u_n=u_n, mu=mu
    )
    rows = problem.element_dofs[elements]
    neighbors = problem.neighbor_dofs[elements]
    has_neighbor = neighbors >= 0

    _scatter_add(
        jac_u,
        (
            np.broadcast_to(rows[:, :, None], d_own.shape),
            np.broadcast_to(rows[:, None, :], d_own.shape),
        ),
        factors[:, None, None] * d_own,
    )
    if neighbors.shape[1] > 0:
        _scatter_add(
            jac_u,
            (
                np.broadcast_to(rows[:, :, None], d_neighbor.shape),
                np.broadcast_to(
                    np.where(has_neighbor, neighbors, 0)[:, None, :],
                    d_neighbor.shape,
                ),
            ),
            np.where(has_neighbor[:, None, :], d_neighbor, 0.0)
            * factors[:, None, None],
        )
    if problem.n_params > 0:
        _scatter_add(
            jac_mu,
            (
                np.broadcast_to(rows[:, :, None], d_mu.shape),
                np.broadcast_to(
                    np.arange(problem.n_params)[None, None, :], d_mu.shape
                ),
            ),
            factors[:, None, None] * d_mu,
        )
    return jac_u, jac_mu


def assemble_functionals(
    *,
    problem: Problem,
    u: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    weights: Optional[npt.NDArray[np.float64]] = None,
) -> Functionals:
    """Assemble objective, side constraints and their partial derivatives.

    Args:
        problem (Problem): system to assemble
        u (npt.NDArray[np.float64]): state vector
        mu (npt.NDArray[np.float64]): parameter vector
        weights (Optional[npt.NDArray[np.float64]]): element weights rho

    Returns:
        weighted sums of the element objective and constraint contributions
    """
    problem.check_state(u)
    problem.check_params(mu)
    elements, factors = active_elements(problem=problem, weights=weights)
    n_c = problem.n_constraints

    objective_u = np.zeros(problem.n_state)
    constraints_u_t = np.zeros((problem.n_state, n_c))
    if elements.size == 0:
        return Functionals(
            objective=0.0,
            objective_u=objective_u,
            objective_mu=np.zeros(problem.n_params),
            constraints=np.zeros(n_c),
            constraints_u=constraints_u_t.T.copy(),
            constraints_mu=np.zeros((n_c, problem.n_params)),
        )

    u_e, _ = gather_states(problem=problem, u=u, elements=elements)
    kernel = problem.kernel
    j_e = kernel.objective(elements=elements, u_e=u_e, mu=mu)
    dj_u, dj_mu = kernel.objective_derivatives(
        elements=elements, u_e=u_e, mu=mu
    )
    c_e = kernel.constraints(elements=elements, u_e=u_e, mu=mu)
    dc_u, dc_mu = kernel.constraint_derivatives(
        elements=elements, u_e=u_e, mu=mu
    )
    rows = problem.element_dofs[elements]

    _scatter_add(objective_u, rows, factors[:, None] * dj_u)
    if n_c > 0:
        weighted_dc_u = factors[:, None, None] * np.transpose(dc_u, (0, 2, 1))
        _scatter_add(
            constraints_u_t,
            (
                np.broadcast_to(rows[:, :, None], weighted_dc_u.shape),
                np.broadcast_to(
                    np.arange(n_c)[None, None, :], weighted_dc_u.shape
                ),
            ),
            weighted_dc_u,
        )

    return Functionals(
        objective=float(_ordered_sum(factors * j_e)),
        objective_u=objective_u,
        objective_mu=_ordered_sum(factors[:, None] * dj_mu),
        constraints=_ordered_sum(factors[:, None] * c_e),
        constraints_u=constraints_u_t.T.copy(),
        constraints_mu=_ordered_sum(factors[:, None, None] * dc_mu),
    )


def augmented_lagrangian(
    *, functionals: Functionals, ctx: ALContext
) -> Tuple[float, float]:
    """Augmented Lagrangian and its Lagrangian part.

    Args:
        functionals (Functionals): assembled objective and constraints
        ctx (ALContext): multiplier estimate and penalty

    Returns:
        Tuple of l = j - theta^T c + tau/2 |c|^2 and l^L = j - theta^T c
    """
    constraints = functionals.constraints
    lagrangian = functionals.objective - float(ctx.theta @ constraints)
    penalty = 0.5 * ctx.tau * float(constraints @ constraints)
    return lagrangian + penalty, lagrangian


def augmented_lagrangian_partials(
    *, functionals: Functionals, ctx: ALContext, penalty: bool = True
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Partial derivatives of the augmented Lagrangian w.r.t. u and mu.

    Args:
        functionals (Functionals): assembled objective and constraints
        ctx (ALContext): multiplier estimate and penalty
        penalty (bool): include the penalty term tau c^T dc, False yields the
            partials of the Lagrangian part only

    Returns:
        Tuple of dl/du and dl/dmu
    """
    factor = -ctx.theta
    if penalty:
        factor = factor + ctx.tau * functionals.constraints
    return (
        functionals.objective_u + functionals.constraints_u.T @ factor,
        functionals.objective_mu + functionals.constraints_mu.T @ factor,
    )


def solve_primal(
    *,
    problem: Problem,
    mu: npt.NDArray[np.float64],
    u_guess: Optional[npt.NDArray[np.float64]] = None,
    newton_tol: float = NEWTON_TOLERANCE,
    max_newton_iters: int = MAX_NEWTON_ITERATIONS,
) -> npt.NDArray[np.float64]:
    """Solve the governing equations r(u, mu) = 0 with Newton's method.

    Args:
        problem (Problem): system to solve
        mu (npt.NDArray[np.float64]): parameter vector
        u_guess (Optional[npt.NDArray[np.float64]]): initial guess, the
            problem's initial state if None
        newton_tol (float): tolerance on the residual infinity norm
        max_newton_iters (int): maximal number of Newton steps

    Returns:
        converged state u*(mu)
    """
    problem.check_params(mu)
    guess = problem.initial_state if u_guess is None else u_guess
    problem.check_state(guess)
    if not np.all(np.isfinite(guess)):
        raise ValueError("initial guess of the primal solve is not finite.")

    result = newton_solve(
        residual=lambda u: assemble_residual(problem=problem, u=u, mu=mu),
        jacobian=lambda u: assemble_jacobians(problem=problem, u=u, mu=mu)[0],
        x0=guess,
        tol=newton_tol,
        max_iters=max_newton_iters,
    )
    return result.x


def solve_adjoint(
    *,
    problem: Problem,
    u_star: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
) -> npt.NDArray[np.float64]:
    """Solve the adjoint system (dr/du)^T lambda = (dl/du)^T.

    Args:
        problem (Problem): system to solve
        u_star (npt.NDArray[np.float64]): primal solution at mu
        mu (npt.NDArray[np.float64]): parameter vector
        ctx (ALContext): multiplier estimate and penalty

    Returns:
        adjoint solution lambda*(mu)
    """
    jac_u, _ = assemble_jacobians(problem=problem, u=u_star, mu=mu)
    functionals = assemble_functionals(problem=problem, u=u_star, mu=mu)
    ell_u, _ = augmented_lagrangian_partials(functionals=functionals, ctx=ctx)
    return np.asarray(scipy.linalg.solve(jac_u.T, ell_u), dtype=float)


def solve_sensitivity(
    *,
    problem: Problem,
    u_star: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """Solve the sensitivity system (dr/du) W = -dr/dmu.

    All N_mu columns share a single LU factorization.

    Args:
        problem (Problem): system to solve
        u_star (npt.NDArray[np.float64]): primal solution at mu
        mu (npt.NDArray[np.float64]): parameter vector

    Returns:
        state sensitivity du*/dmu, shape (N_u, N_mu)
    """
    jac_u, jac_mu = assemble_jacobians(problem=problem, u=u_star, mu=mu)
    return lu_solve_checked(jac_u, -jac_mu)


def reduced_al_value_gradient(
    *,
    problem: Problem,
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
    u_guess: Optional[npt.NDArray[np.float64]] = None,
) -> Tuple[float, npt.NDArray[np.float64]]:
    """Value and adjoint gradient of the reduced augmented Lagrangian.

    Args:
        problem (Problem): system to evaluate
        mu (npt.NDArray[np.float64]): parameter vector
        ctx (ALContext): multiplier estimate and penalty
        u_guess (Optional[npt.NDArray[np.float64]]): Newton initial guess

    Returns:
        Tuple of f(mu) = l(u*(mu), mu) and its gradient
    """
    u_star = solve_primal(problem=problem, mu=mu, u_guess=u_guess)
    return _value_gradient_at(problem=problem, u_star=u_star, mu=mu, ctx=ctx)


def al_gradient_split(
    *,
    problem: Problem,
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
    u_guess: Optional[npt.NDArray[np.float64]] = None,
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Lagrangian and penalty parts of the reduced AL gradient.

    The Lagrangian part uses its own adjoint, the penalty part
    tau c^T dc/dmu uses the total constraint derivative obtained from the
    state sensitivity. Their sum equals the AL gradient.

    Args:
        problem (Problem): system to evaluate
        mu (npt.NDArray[np.float64]): parameter vector
        ctx (ALContext): multiplier estimate and penalty
        u_guess (Optional[npt.NDArray[np.float64]]): Newton initial guess

    Returns:
        Tuple of the Lagrangian gradient and the penalty gradient
    """
    u_star = solve_primal(problem=problem, mu=mu, u_guess=u_guess)
    jac_u, jac_mu = assemble_jacobians(problem=problem, u=u_star, mu=mu)
    functionals = assemble_functionals(problem=problem, u=u_star, mu=mu)
    ell_u, ell_mu = augmented_lagrangian_partials(
        functionals=functionals, ctx=ctx, penalty=False
    )
    lambda_lagrangian = scipy.linalg.solve(jac_u.T, ell_u)
    gradient_lagrangian = ell_mu - jac_mu.T @ lambda_lagrangian

    sensitivity = lu_solve_checked(jac_u, -jac_mu)
    total_dc = functionals.constraints_mu + functionals.constraints_u @ (
        sensitivity
    )
    gradient_penalty = ctx.tau * (total_dc.T @ functionals.constraints)
    return gradient_lagrangian, gradient_penalty


class HdmSolver:
    """High-dimensional model solves with warm starts, caching and counting.

    Each primal solve is seeded with the converged state of the nearest
    previously solved parameter. Results for parameters that were already
    solved are returned from the cache and not counted again. Every counted
    solve is appended to :py:attr:`events`.

    Note:
        Instances are stateful and belong to a single optimization run.
    """

    def __init__(
        self,
        problem: Problem,
        *,
        newton_tol: float = NEWTON_TOLERANCE,
        max_newton_iters: int = MAX_NEWTON_ITERATIONS,
        cache_size: int = 64,
    ):
        """Create a solver for the given problem.

        Args:
            problem (Problem): system to solve
            newton_tol (float): Newton tolerance on the residual
            max_newton_iters (int): maximal number of Newton steps
            cache_size (int): number of parameter points kept in the cache
        """
        self.problem = problem
        self.newton_tol = newton_tol
        self.max_newton_iters = max_newton_iters
        self.cache_size = cache_size
        self.counts: Dict[str, int] = {
            "primal": 0,
            "adjoint": 0,
            "sensitivity": 0,
        }
        self.events: List[Tuple[str, Tuple[float, ...]]] = []
        self._states: "OrderedDict[bytes, _CachedState]" = OrderedDict()
        self._adjoints: "OrderedDict[_AdjointKey, npt.NDArray[np.float64]]" = (
            OrderedDict()
        )

    @property
    def n_solves(self) -> int:
        """Number of counted primal and adjoint solves."""
        return self.counts["primal"] + self.counts["adjoint"]

    def primal(self, mu: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """Primal solution u*(mu), from the cache if available."""
        mu = np.asarray(mu, dtype=float)
        key = mu.tobytes()
        if key in self._states:
            self._states.move_to_end(key)
            return self._states[key][1]

        u_star = solve_primal(
            problem=self.problem,
            mu=mu,
            u_guess=self._warm_start(mu),
            newton_tol=self.newton_tol,
            max_newton_iters=self.max_newton_iters,
        )
        self._record("primal", mu)
        self._states[key] = (mu.copy(), u_star)
        if len(self._states) > self.cache_size:
            self._states.popitem(last=False)
        return u_star

    def adjoint(
        self, mu: npt.NDArray[np.float64], ctx: ALContext
    ) -> npt.NDArray[np.float64]:
        """Adjoint solution lambda*(mu; theta, tau)."""
        mu = np.asarray(mu, dtype=float)
        key = (mu.tobytes(), ctx.theta.tobytes(), ctx.tau)
        if key in self._adjoints:
            self._adjoints.move_to_end(key)
            return self._adjoints[key]

        u_star = self.primal(mu)
        lambda_star = solve_adjoint(
            problem=self.problem, u_star=u_star, mu=mu, ctx=ctx
        )
        self._record("adjoint", mu)
        self._adjoints[key] = lambda_star
        if len(self._adjoints) > self.cache_size:
            self._adjoints.popitem(last=False)
        return lambda_star

    def pair(
        self, mu: npt.NDArray[np.float64], ctx: ALContext
    ) -> PrimalAdjointPair:
        """Primal and adjoint solution at mu."""
        return PrimalAdjointPair(
            u_star=self.primal(mu),
            lambda_star=self.adjoint(mu, ctx),
            mu=np.array(mu, dtype=float),
        )

    def sensitivity(
        self, mu: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        """State sensitivity du*/dmu (always counted, never cached)."""
        mu = np.asarray(mu, dtype=float)
        sensitivity = solve_sensitivity(
            problem=self.problem, u_star=self.primal(mu), mu=mu
        )
        self._record("sensitivity", mu)
        return sensitivity

    def functionals(self, mu: npt.NDArray[np.float64]) -> Functionals:
        """Objective and constraints at u*(mu)."""
        mu = np.asarray(mu, dtype=float)
        return assemble_functionals(
            problem=self.problem, u=self.primal(mu), mu=mu
        )

    def value(self, mu: npt.NDArray[np.float64], ctx: ALContext) -> float:
        """Reduced augmented Lagrangian f(mu; theta, tau)."""
        value, _ = augmented_lagrangian(
            functionals=self.functionals(mu), ctx=ctx
        )
        return value

    def value_gradient(
        self, mu: npt.NDArray[np.float64], ctx: ALContext
    ) -> Tuple[float, npt.NDArray[np.float64]]:
        """Reduced augmented Lagrangian and its adjoint gradient."""
        mu = np.asarray(mu, dtype=float)
        u_star = self.primal(mu)
        lambda_star = self.adjoint(mu, ctx)
        functionals = assemble_functionals(
            problem=self.problem, u=u_star, mu=mu
        )
        _, jac_mu = assemble_jacobians(problem=self.problem, u=u_star, mu=mu)
        value, _ = augmented_lagrangian(functionals=functionals, ctx=ctx)
        _, ell_mu = augmented_lagrangian_partials(
            functionals=functionals, ctx=ctx
        )
        return value, ell_mu - jac_mu.T @ lambda_star

    def _warm_start(
        self, mu: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        if not self._states:
            return self.problem.initial_state
        best_state = self.problem.initial_state
        best_distance = np.inf
        for cached_mu, cached_state in self._states.values():
            distance = float(np.linalg.norm(cached_mu - mu))
            if distance < best_distance:
                best_distance = distance
                best_state = cached_state
        return best_state

    def _record(self, kind: str, mu: npt.NDArray[np.float64]) -> None:
        self.counts[kind] += 1
        self.events.append((kind, tuple(float(value) for value in mu)))


def active_elements(
    *, problem: Problem, weights: Optional[npt.NDArray[np.float64]]
) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
    """Elements to visit and their weights, in ascending element order.

    Args:
        problem (Problem): assembled system
        weights (Optional[npt.NDArray[np.float64]]): element weights, None
            for unit weights on all elements

    Returns:
        Tuple of element indices with positive weight and the weights
    """
    if weights is None:
        return np.arange(problem.n_elements), np.ones(problem.n_elements)

    weights = np.asarray(weights, dtype=float)
    if weights.shape != (problem.n_elements,):
        raise ValueError(
            f"weight vector has shape {weights.shape}, expected "
            f"({problem.n_elements},)."
        )
    elements = np.flatnonzero(weights > 0)
    return elements, weights[elements]


def gather_states(
    *,
    problem: Problem,
    u: npt.NDArray[np.float64],
    elements: npt.NDArray[np.int64],
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Gather element and neighbor states (P_e^T u and P_e'^T u)."""
    neighbors = problem.neighbor_dofs[elements]
    u_n = np.where(neighbors >= 0, u[np.maximum(neighbors, 0)], 0.0)
    return u[problem.element_dofs[elements]], u_n


def lu_solve_checked(
    matrix: npt.NDArray[np.float64], rhs: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """Solve with one LU factorization, raising on exactly singular input."""
    if matrix.shape[0] == 0:
        return np.zeros_like(rhs, dtype=float)
    factors, pivots = scipy.linalg.lu_factor(matrix, check_finite=True)
    if np.any(np.diag(factors) == 0.0):
        raise scipy.linalg.LinAlgError("Singular matrix in LU factorization.")
    return np.asarray(scipy.linalg.lu_solve((factors, pivots), rhs))


def _scatter_add(
    target: npt.NDArray[np.float64],
    index: object,
    values: npt.NDArray[np.float64],
) -> None:
    # contributions to the same entry are added in a canonical order (sorted
    # by value), independent of the element numbering
    if isinstance(index, tuple):
        flat_index = np.ravel_multi_index(
            tuple(np.asarray(i).ravel() for i in index), target.shape
        )
    else:
        flat_index = np.asarray(index).ravel()
        if target.ndim > 1:
            raise ValueError("matrix targets need a tuple index.")
    flat_values = np.asarray(values, dtype=float).ravel()
    order = np.lexsort((flat_values, flat_index))
    np.add.at(target.reshape(-1), flat_index[order], flat_values[order])


def _ordered_sum(values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return np.sort(values, axis=0).sum(axis=0)


def _value_gradient_at(
    *,
    problem: Problem,
    u_star: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
    ctx: ALContext,
) -> Tuple[float, npt.NDArray[np.float64]]:
    jac_u, jac_mu = assemble_jacobians(problem=problem, u=u_star, mu=mu)
    functionals = assemble_functionals(problem=problem, u=u_star, mu=mu)
    value, _ = augmented_lagrangian(functionals=functionals, ctx=ctx)
    ell_u, ell_mu = augmented_lagrangian_partials(
        functionals=functionals, ctx=ctx
    )
    lambda_star = scipy.linalg.solve(jac_u.T, ell_u)
    return value, ell_mu - jac_mu.T @ lambda_star


def _max_abs(values: npt.NDArray[np.float64]) -> float:
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values)))
