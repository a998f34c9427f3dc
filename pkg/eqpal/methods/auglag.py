"""Outer augmented Lagrangian loop with multiplier and penalty schedules."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from aenum import Enum

from eqpal.data.problem import ALContext, Problem

log = logging.getLogger(__name__)


class SubsolverMethod(Enum):  # pylint: disable=too-few-public-methods
    """Model used by the trust-region subproblem solver."""

    _init_ = "value __doc__"
    HDM = "hdm", "exact high-dimensional model"
    ROM = "rom", "Galerkin reduced-order model (unit weights)"
    EQP = "eqp", "hyperreduced model with trained EQP weights"


@dataclass(frozen=True)
class AuglagConfig:
    """Parameters of the augmented Lagrangian framework.

    Args:
        tau0 (float): initial penalty parameter
        scale_a (float): penalty growth factor on infeasible majors
        pi_star (float): final feasibility tolerance
        omega_star (float): final optimality tolerance
        max_major_iters (int): cap on major iterations
        method (SubsolverMethod): subproblem model
        inherit_snapshots (int): snapshots carried over to the next major
    """

    tau0: float = 10.0
    scale_a: float = 50.0
    pi_star: float = 1e-6
    omega_star: float = 1e-5
    max_major_iters: int = 30
    method: SubsolverMethod = SubsolverMethod.EQP
    inherit_snapshots: int = 0

    def __post_init__(self) -> None:
        """Validates the parameters."""
        if self.tau0 <= 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0}.")
        if self.scale_a <= 1:
            raise ValueError(f"scale_a must exceed 1, got {self.scale_a}.")
        if self.pi_star <= 0 or self.omega_star <= 0:
            raise ValueError("pi_star and omega_star must be positive.")
        if self.max_major_iters < 1:
            raise ValueError("max_major_iters must be at least 1.")
        if self.inherit_snapshots < 0:
            raise ValueError("inherit_snapshots must be non-negative.")
        object.__setattr__(self, "method", SubsolverMethod(self.method))


@dataclass(frozen=True)
class SubproblemResult:
    """Solution of one bound-constrained AL subproblem.

    Attributes:
        mu (npt.NDArray[np.float64]): approximate minimizer
        objective (float): objective j at mu
        constraints (npt.NDArray[np.float64]): constraint values c at mu
        chi (float): infinity norm of the AL criticality at mu
        iterations (int): trust-region iterations
        converged (bool): whether the subproblem tolerance was met
        trace (Tuple[Dict[str, Any], ...]): per-iteration trace records
        counts (Dict[str, int]): cumulative solve counts after the subproblem
    """

    mu: npt.NDArray[np.float64]
    objective: float
    constraints: npt.NDArray[np.float64]
    chi: float
    iterations: int
    converged: bool = True
    trace: Tuple[Dict[str, Any], ...] = ()
    counts: Dict[str, int] = field(default_factory=dict)


Subsolver = Callable[
    [npt.NDArray[np.float64], ALContext, float], SubproblemResult
]


@dataclass(frozen=True)
class MajorRecord:  # pylint: disable=too-many-instance-attributes
    """One major iteration of the augmented Lagrangian framework."""

    iteration: int
    theta: npt.NDArray[np.float64]
    tau: float
    pi: float
    omega: float
    mu: npt.NDArray[np.float64]
    objective: float
    c_inf: float
    c_norm: float
    chi_inf: float
    feasible: bool
    subproblem_iterations: int
    wall_time: float
    trace: Tuple[Dict[str, Any], ...] = field(default=(), repr=False)
    counts: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class AuglagResult:
    """History of :func:`run_auglag`.

    Attributes:
        records (Tuple[MajorRecord, ...]): major iterations
        converged (bool): both final tolerances met
    """

    records: Tuple[MajorRecord, ...]
    converged: bool

    @property
    def final(self) -> MajorRecord:
        """Last major iteration."""
        return self.records[-1]


def update_multipliers(
    theta: npt.NDArray[np.float64],
    tau: float,
    c_value: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """First-order multiplier update theta - tau c."""
    return np.asarray(theta, dtype=float) - tau * np.asarray(
        c_value, dtype=float
    )


def recompute_schedule(
    feasible_flags: Sequence[bool],
    tau0: float,
    scale_a: float,
    omega_star: float,
) -> List[Tuple[float, float, float]]:
    """Penalty and tolerance schedule implied by the feasibility outcomes.

    Args:
        feasible_flags (Sequence[bool]): feasibility of each finished major
        tau0 (float): initial penalty
        scale_a (float): penalty growth factor
        omega_star (float): floor of the optimality tolerance

    Returns:
        (tau_i, pi_i, omega_i) for every major, one entry more than flags
    """
    tau = tau0
    pi = 1.0 / tau0
    omega = max(1.0 / tau0**0.1, omega_star)
    schedule = [(tau, pi, omega)]
    for feasible in feasible_flags:
        tau, pi, omega = _next_schedule(
            feasible=feasible,
            tau=tau,
            pi=pi,
            omega=omega,
            scale_a=scale_a,
            omega_star=omega_star,
        )
        schedule.append((tau, pi, omega))
    return schedule


def run_auglag(
    *,
    problem: Problem,
    config: AuglagConfig,
    subsolver: Subsolver,
    mu0: npt.NDArray[np.float64],
    callback: Optional[Callable[[MajorRecord], None]] = None,
) -> AuglagResult:
    """Solve min j s.t. c = 0 in the box with the augmented Lagrangian method.

    Each major iteration solves the bound-constrained AL subproblem for fixed
    (theta, tau) to the tolerance omega. Feasible majors (|c|_2 <= pi)
    update the multipliers, infeasible ones increase the penalty.

    Args:
        problem (Problem): system with side constraints
        config (AuglagConfig): framework parameters
        subsolver (Subsolver): subproblem solver (mu_start, ctx, omega)
        mu0 (npt.NDArray[np.float64]): start point inside the box
        callback (Optional[Callable[[MajorRecord], None]]): called with
            every finished major iteration

    Returns:
        major iteration history
    """
    mu = np.array(mu0, dtype=float)
    problem.check_params(mu)
    if not problem.in_bounds(mu):
        raise ValueError("start point of the AL framework is not in the box.")

    theta = np.zeros(problem.n_constraints)
    tau, pi, omega = recompute_schedule(
        [], config.tau0, config.scale_a, config.omega_star
    )[0]
    records = []
    converged = False
    for iteration in range(config.max_major_iters):
        ctx = ALContext(theta=theta, tau=tau)
        start = time.perf_counter()
        result = subsolver(mu, ctx, omega)
        wall_time = time.perf_counter() - start

        mu = np.array(result.mu, dtype=float)
        c_norm = float(np.linalg.norm(result.constraints))
        c_inf = float(np.linalg.norm(result.constraints, np.inf))
        feasible = c_norm <= pi
        records.append(
            MajorRecord(
                iteration=iteration,
                theta=theta.copy(),
                tau=tau,
                pi=pi,
                omega=omega,
                mu=mu.copy(),
                objective=result.objective,
                c_inf=c_inf,
                c_norm=c_norm,
                chi_inf=result.chi,
                feasible=feasible,
                subproblem_iterations=result.iterations,
                wall_time=wall_time,
                trace=result.trace,
                counts=dict(result.counts),
            )
        )
        if callback is not None:
            callback(records[-1])
        log.info(
            f"major {iteration}: j = {result.objective:.10g}, "
            f"|c|_inf = {c_inf:.3e}, |chi|_inf = {result.chi:.3e}, "
            f"tau = {tau:g}, {result.iterations} TR iterations."
        )

        if result.chi <= config.omega_star and c_norm <= config.pi_star:
            converged = True
            break
        if feasible:
            theta = update_multipliers(theta, tau, result.constraints)
        tau, pi, omega = _next_schedule(
            feasible=feasible,
            tau=tau,
            pi=pi,
            omega=omega,
            scale_a=config.scale_a,
            omega_star=config.omega_star,
        )

    if not converged:
        log.warning(
            f"augmented Lagrangian stopped after {len(records)} majors "
            "without meeting both tolerances."
        )
    return AuglagResult(records=tuple(records), converged=converged)


def _next_schedule(
    *,
    feasible: bool,
    tau: float,
    pi: float,
    omega: float,
    scale_a: float,
    omega_star: float,
) -> Tuple[float, float, float]:
    if feasible:
        pi = pi / tau**0.9
        omega = omega / tau
    else:
        tau = scale_a * tau
        pi = 1.0 / tau**0.1
        omega = 1.0 / tau
    return tau, pi, max(omega, omega_star)
