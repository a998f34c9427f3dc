"""Dense revised simplex for min c^T x s.t. A x <= b, x >= 0."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg
from aenum import Enum

log = logging.getLogger(__name__)

LP_TOLERANCE = 1e-9
SINGULAR_PIVOT_TOLERANCE = 1e-12


class LpStatus(Enum):  # pylint: disable=too-few-public-methods
    """Termination status of the simplex method."""

    _init_ = "value __doc__"
    OPTIMAL = "optimal", "optimal basic feasible solution found"
    INFEASIBLE = "infeasible", "no feasible point exists"
    ITERATION_LIMIT = "iteration-limit", "maximal number of pivots reached"
    UNBOUNDED = "unbounded", "objective unbounded below on the feasible set"


@dataclass(frozen=True)
class LpInstance:
    """Linear program min c^T x s.t. A x <= b, x >= 0.

    Args:
        c (npt.NDArray[np.float64]): cost vector
        A (npt.NDArray[np.float64]): inequality matrix (n_rows x n_vars)
        b (npt.NDArray[np.float64]): right-hand side
    """

    c: npt.NDArray[np.float64]
    A: npt.NDArray[np.float64]  # pylint: disable=invalid-name
    b: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        """Validates dimensions and finiteness."""
        c = np.array(self.c, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        matrix = np.array(self.A, dtype=float).reshape(b.size, c.size)
        for name, value in (("c", c), ("A", matrix), ("b", b)):
            if not np.all(np.isfinite(value)):
                raise ValueError(f"LP data {name} contains non-finite values.")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_vars(self) -> int:
        """Number of variables."""
        return int(self.c.size)

    @property
    def n_rows(self) -> int:
        """Number of inequality rows."""
        return int(self.b.size)


@dataclass(frozen=True)
class LpResult:
    """Outcome of :func:`solve_lp`.

    Attributes:
        x (npt.NDArray[np.float64]): final primal point
        objective (float): c^T x
        status (LpStatus): termination status
        dual (npt.NDArray[np.float64]): final dual estimate y <= 0 of the
            inequality rows
        iterations (int): number of pivots over both phases
    """

    x: npt.NDArray[np.float64]
    objective: float
    status: LpStatus
    dual: npt.NDArray[np.float64]
    iterations: int


@dataclass(frozen=True)
class _SimplexState:
    status: LpStatus
    basis: npt.NDArray[np.int64]
    x_basic: npt.NDArray[np.float64]
    y: npt.NDArray[np.float64]
    iterations: int


def solve_lp(
    instance: LpInstance,
    *,
    max_iters: Optional[int] = None,
    tol: float = LP_TOLERANCE,
) -> LpResult:
    """Solve the LP with the revised primal simplex method.

    The rows are augmented with slacks. If b >= 0 the slack basis is
    feasible, otherwise rows with negative right-hand side are negated and a
    Phase-I problem with artificial variables finds a first basis. Pricing
    follows Dantzig's rule and switches to Bland's rule after 10 * n_rows
    pivots of a phase.

    Args:
        instance (LpInstance): linear program
        max_iters (Optional[int]): pivot limit, 50 * (n_vars + n_rows) if
            None
        tol (float): pivot and optimality tolerance

    Returns:
        result with the basic solution, status and dual estimate

    Raises:
        LinAlgError: if a basis matrix is numerically singular
    """
    n_vars, n_rows = instance.n_vars, instance.n_rows
    if max_iters is None:
        max_iters = 50 * (n_vars + n_rows)

    sign = np.where(instance.b < 0, -1.0, 1.0)
    a_std = np.hstack([instance.A * sign[:, None], np.diag(sign)])
    b_std = instance.b * sign
    basis = n_vars + np.arange(n_rows)
    kept_rows = np.ones(n_rows, dtype=bool)
    iterations = 0

    negative_rows = np.flatnonzero(instance.b < 0)
    if negative_rows.size > 0:
        artificial = np.zeros((n_rows, negative_rows.size))
        artificial[negative_rows, np.arange(negative_rows.size)] = 1.0
        a_aux = np.hstack([a_std, artificial])
        phase_one_cost = np.zeros(a_aux.shape[1])
        phase_one_cost[n_vars + n_rows :] = 1.0
        basis[negative_rows] = n_vars + n_rows + np.arange(negative_rows.size)

        state = _revised_simplex(
            a_aux, b_std, phase_one_cost, basis, max_iters=max_iters, tol=tol
        )
        iterations += state.iterations
        if state.status == LpStatus.ITERATION_LIMIT:
            return _result(instance, state, sign, kept_rows, iterations)

        infeasibility = float(phase_one_cost[state.basis] @ state.x_basic)
        if infeasibility > tol * max(1.0, float(np.max(np.abs(b_std)))):
            log.debug(f"Phase I ended with infeasibility {infeasibility:.3e}.")
            return LpResult(
                x=np.zeros(n_vars),
                objective=np.nan,
                status=LpStatus.INFEASIBLE,
                dual=np.zeros(n_rows),
                iterations=iterations,
            )
        basis, kept_rows = _drive_out_artificials(
            a_aux, state.basis, n_structural=n_vars + n_rows, tol=tol
        )
        a_std = a_std[kept_rows]
        b_std = b_std[kept_rows]

    cost = np.concatenate([instance.c, np.zeros(n_rows)])
    state = _revised_simplex(
        a_std,
        b_std,
        cost,
        basis,
        max_iters=max_iters - iterations,
        tol=tol,
    )
    iterations += state.iterations
    log.debug(
        f"simplex finished with status {state.status.value} after "
        f"{iterations} pivots."
    )
    return _result(instance, state, sign, kept_rows, iterations)


def _revised_simplex(
    a_matrix: npt.NDArray[np.float64],
    b_vector: npt.NDArray[np.float64],
    cost: npt.NDArray[np.float64],
    basis: npt.NDArray[np.int64],
    *,
    max_iters: int,
    tol: float,
) -> _SimplexState:
    n_rows = a_matrix.shape[0]
    basis = np.array(basis, dtype=int)
    bland_after = 10 * n_rows
    iterations = 0

    while True:
        x_basic, y, factors = _basic_solution(a_matrix, b_vector, cost, basis)
        reduced_costs = cost - a_matrix.T @ y
        reduced_costs[basis] = 0.0
        candidates = np.flatnonzero(reduced_costs < -tol)
        if candidates.size == 0:
            return _SimplexState(
                LpStatus.OPTIMAL, basis, x_basic, y, iterations
            )
        if iterations >= max_iters:
            return _SimplexState(
                LpStatus.ITERATION_LIMIT, basis, x_basic, y, iterations
            )

        if iterations < bland_after:
            entering = candidates[np.argmin(reduced_costs[candidates])]
        else:
            entering = candidates[0]

        if n_rows == 0:
            return _SimplexState(
                LpStatus.UNBOUNDED, basis, x_basic, y, iterations
            )
        direction = scipy.linalg.lu_solve(factors, a_matrix[:, entering])
        rows = np.flatnonzero(direction > tol)
        if rows.size == 0:
            return _SimplexState(
                LpStatus.UNBOUNDED, basis, x_basic, y, iterations
            )
        ratios = np.maximum(x_basic[rows], 0.0) / direction[rows]
        ties = rows[ratios == ratios.min()]
        leaving = ties[np.argmin(basis[ties])]
        basis[leaving] = entering
        iterations += 1


def _basic_solution(
    a_matrix: npt.NDArray[np.float64],
    b_vector: npt.NDArray[np.float64],
    cost: npt.NDArray[np.float64],
    basis: npt.NDArray[np.int64],
) -> Tuple[
    npt.NDArray[np.float64],
    npt.NDArray[np.float64],
    Optional[Tuple[npt.NDArray[np.float64], npt.NDArray[np.int32]]],
]:
    if a_matrix.shape[0] == 0:
        return np.zeros(0), np.zeros(0), None
    factors = _factor_basis(a_matrix[:, basis])
    x_basic = scipy.linalg.lu_solve(factors, b_vector)
    y = scipy.linalg.lu_solve(factors, cost[basis], trans=1)
    if not (np.all(np.isfinite(x_basic)) and np.all(np.isfinite(y))):
        raise scipy.linalg.LinAlgError("simplex basis solve is not finite.")
    return x_basic, y, factors


def _factor_basis(
    matrix: npt.NDArray[np.float64],
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.int32]]:
    """LU factors of a basis matrix, LinAlgError if it is singular."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, pivots = scipy.linalg.lu_factor(matrix)
    diagonal = np.abs(np.diag(lu))
    if not np.all(np.isfinite(diagonal)) or diagonal.min() <= (
        SINGULAR_PIVOT_TOLERANCE * max(1.0, float(diagonal.max()))
    ):
        raise scipy.linalg.LinAlgError(
            f"singular simplex basis (smallest pivot {diagonal.min():.3e})."
        )
    return lu, pivots


def _drive_out_artificials(
    a_aux: npt.NDArray[np.float64],
    basis: npt.NDArray[np.int64],
    *,
    n_structural: int,
    tol: float,
) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.bool_]]:
    """Pivot basic artificials (at zero level) out, drop redundant rows."""
    basis = np.array(basis, dtype=int)
    kept_rows = np.ones(basis.size, dtype=bool)
    for row in range(basis.size):
        if basis[row] < n_structural:
            continue
        factors = _factor_basis(a_aux[:, basis])
        unit = np.zeros(basis.size)
        unit[row] = 1.0
        tableau_row = scipy.linalg.lu_solve(factors, unit, trans=1) @ a_aux
        tableau_row[basis] = 0.0
        tableau_row[n_structural:] = 0.0
        candidates = np.flatnonzero(np.abs(tableau_row) > tol)
        if candidates.size > 0:
            basis[row] = candidates[0]
        else:
            kept_rows[row] = False
    return basis[kept_rows], kept_rows


def _result(
    instance: LpInstance,
    state: _SimplexState,
    sign: npt.NDArray[np.float64],
    kept_rows: npt.NDArray[np.bool_],
    iterations: int,
) -> LpResult:
    values = np.zeros(instance.n_vars + instance.n_rows + kept_rows.size)
    values[state.basis] = state.x_basic
    x = values[: instance.n_vars]
    x = np.where((x < 0) & (x > -LP_TOLERANCE), 0.0, x)

    dual = np.zeros(instance.n_rows)
    if state.y.size == int(kept_rows.sum()):
        dual[kept_rows] = state.y * sign[kept_rows]

    objective = float(instance.c @ x)
    if state.status == LpStatus.UNBOUNDED:
        objective = -np.inf
    return LpResult(
        x=x,
        objective=objective,
        status=state.status,
        dual=dual,
        iterations=iterations,
    )
