"""Steady viscous Burgers inverse design problem on the unit interval.

The state holds the cell values of a cell-centered finite volume
discretization of (u^2/2)_x - nu u_xx = sum_p mu_p phi_p(x) + f(x) with
Dirichlet values at both ends. Each cell is one element, coupled to its two
adjacent cells.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
from aenum import Enum

from eqpal.data.problem import ElementKernel, Problem
from eqpal.methods.elemental_system import solve_primal

log = logging.getLogger(__name__)

SLACK_UPPER_BOUND = 1e12


class IntegralKind(Enum):  # pylint: disable=too-few-public-methods
    """Integral quantity constrained by a side constraint."""

    _init_ = "value __doc__"
    VOLUME = "volume", "integral of u over the domain"
    QUADRATIC = "quadratic", "integral of u^2 over the domain"


class ConstraintSense(Enum):  # pylint: disable=too-few-public-methods
    """Sense of an integral side constraint."""

    _init_ = "value __doc__"
    EQUALITY = "equality", "integral equals the right-hand side"
    INEQUALITY = "inequality", "integral bounded above by the right-hand side"


@dataclass(frozen=True)
class IntegralConstraint:
    """Integral side constraint of the testbed.

    Args:
        kind (IntegralKind): constrained integral
        sense (ConstraintSense): equality or upper bound
        factor (float): scaling of the target integral used by
            :func:`calibrate` to set the right-hand side
        rhs (Optional[float]): right-hand side, None until calibrated
    """

    kind: IntegralKind
    sense: ConstraintSense
    factor: float = 1.0
    rhs: Optional[float] = None


def default_constraints() -> Tuple[IntegralConstraint, ...]:
    """Volume equality (0.98 of the target) and quadratic upper bound (1.01)."""
    return (
        IntegralConstraint(
            kind=IntegralKind.VOLUME,
            sense=ConstraintSense.EQUALITY,
            factor=0.98,
        ),
        IntegralConstraint(
            kind=IntegralKind.QUADRATIC,
            sense=ConstraintSense.INEQUALITY,
            factor=1.01,
        ),
    )


@dataclass(frozen=True)
class BurgersConfig:  # pylint: disable=too-many-instance-attributes
    """Configuration of the Burgers testbed.

    Args:
        n_cells (int): number of finite volume cells
        viscosity (float): viscosity nu
        n_design (int): number of Gaussian source amplitudes
        design_lower (float): lower bound of every source amplitude
        design_upper (float): upper bound of every source amplitude
        boundary_left (float): Dirichlet value at x = 0
        boundary_right (float): Dirichlet value at x = 1
        bump_width (Optional[float]): width of the Gaussian bumps, defaults
            to half the bump spacing
        mu_true (Optional[npt.NDArray[np.float64]]): source amplitudes used
            to generate the target state
        target_state (Optional[npt.NDArray[np.float64]]): target state of the
            tracking objective, zero if None
        forcing (Optional[npt.NDArray[np.float64]]): additional per-cell
            source, zero if None
        constraints (Tuple[IntegralConstraint, ...]): side constraints
    """

    n_cells: int = 128
    viscosity: float = 0.05
    n_design: int = 8
    design_lower: float = -1.0
    design_upper: float = 1.0
    boundary_left: float = 1.0
    boundary_right: float = 0.0
    bump_width: Optional[float] = None
    mu_true: Optional[npt.NDArray[np.float64]] = None
    target_state: Optional[npt.NDArray[np.float64]] = None
    forcing: Optional[npt.NDArray[np.float64]] = None
    constraints: Tuple[IntegralConstraint, ...] = dataclasses.field(
        default_factory=default_constraints
    )

    def __post_init__(self) -> None:
        """Validates the configuration."""
        if self.n_cells < 4:
            raise ValueError(f"n_cells must be at least 4, got {self.n_cells}.")
        if not self.viscosity > 0:
            raise ValueError(
                f"viscosity must be positive, got {self.viscosity}."
            )
        if self.n_design < 0:
            raise ValueError(
                f"n_design must be nonnegative, got {self.n_design}."
            )
        if not (
            np.isfinite(self.design_lower) and np.isfinite(self.design_upper)
        ):
            raise ValueError("design bounds must be finite.")
        if self.design_lower > self.design_upper:
            raise ValueError(
                f"design lower bound {self.design_lower} exceeds upper bound "
                f"{self.design_upper}."
            )
        if self.bump_width is not None and not self.bump_width > 0:
            raise ValueError(
                f"bump_width must be positive, got {self.bump_width}."
            )
        for name, size in (
            ("mu_true", self.n_design),
            ("target_state", self.n_cells),
            ("forcing", self.n_cells),
        ):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.array(value, dtype=float).ravel()
            if value.size != size:
                raise ValueError(
                    f"{name} has length {value.size}, expected {size}."
                )
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def cell_width(self) -> float:
        """Uniform cell width h."""
        return 1.0 / self.n_cells

    @property
    def cell_centers(self) -> npt.NDArray[np.float64]:
        """Cell midpoints x_e."""
        return (np.arange(self.n_cells) + 0.5) * self.cell_width

    @property
    def n_slacks(self) -> int:
        """Number of inequality constraints, each owns one slack."""
        return sum(
            1
            for constraint in self.constraints
            if constraint.sense == ConstraintSense.INEQUALITY
        )

    @property
    def n_params(self) -> int:
        """Number of parameters: source amplitudes followed by slacks."""
        return self.n_design + self.n_slacks

    def true_design(self) -> npt.NDArray[np.float64]:
        """Source amplitudes generating the target."""
        if self.mu_true is not None:
            return np.array(self.mu_true)
        centers = (np.arange(self.n_design) + 0.5) / max(self.n_design, 1)
        design = 0.5 * np.sin(2.0 * np.pi * centers)
        return np.clip(design, self.design_lower, self.design_upper)


@dataclass(frozen=True)
class SlackLayout:
    """Placement of the slack variables inside the parameter vector.

    The inequality Q <= rhs is rewritten as c = d + s = 0 with the margin
    d = Q - rhs and the slack s >= 0.

    Attributes:
        constraint_indices (Tuple[int, ...]): inequality constraint indices
        parameter_indices (Tuple[int, ...]): slack position in mu for each
            inequality constraint
        upper_bound (float): finite stand-in for an unbounded slack
    """

    constraint_indices: Tuple[int, ...]
    parameter_indices: Tuple[int, ...]
    upper_bound: float = SLACK_UPPER_BOUND

    def slack_of(self, constraint_index: int) -> Optional[int]:
        """Parameter index of the slack of a constraint, None for equalities."""
        if constraint_index not in self.constraint_indices:
            return None
        position = self.constraint_indices.index(constraint_index)
        return self.parameter_indices[position]


def slack_layout(config: BurgersConfig) -> SlackLayout:
    """Slack layout of the testbed: slacks follow the source amplitudes."""
    constraint_indices = tuple(
        index
        for index, constraint in enumerate(config.constraints)
        if constraint.sense == ConstraintSense.INEQUALITY
    )
    return SlackLayout(
        constraint_indices=constraint_indices,
        parameter_indices=tuple(
            config.n_design + position
            for position in range(len(constraint_indices))
        ),
    )


def source_bumps(config: BurgersConfig) -> npt.NDArray[np.float64]:
    """Gaussian bumps phi_p at the cell centers, shape (n_cells, n_design)."""
    if config.n_design == 0:
        return np.zeros((config.n_cells, 0))
    spacing = 1.0 / config.n_design
    width = 0.5 * spacing if config.bump_width is None else config.bump_width
    centers = (np.arange(config.n_design) + 0.5) * spacing
    distance = (config.cell_centers[:, None] - centers[None, :]) / width
    return np.asarray(np.exp(-0.5 * distance**2))


class BurgersKernel(ElementKernel):
    """Element callbacks of the Burgers testbed, one cell per element."""

    def __init__(self, config: BurgersConfig):
        """Precompute the bumps, boundary data and constraint layout.

        Args:
            config (BurgersConfig): testbed configuration
        """
        self.config = config
        self.h = config.cell_width
        self.nu = config.viscosity
        self.n_cells = config.n_cells
        self.bumps = source_bumps(config)
        self.forcing = (
            np.zeros(config.n_cells)
            if config.forcing is None
            else np.array(config.forcing)
        )
        self.target = (
            np.zeros(config.n_cells)
            if config.target_state is None
            else np.array(config.target_state)
        )
        self.layout = slack_layout(config)
        self.n_params = config.n_params

    def residual(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        u_n: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> npt.NDArray[np.float64]:
        """Flux balance of each cell minus its sources, shape (n_e, 1)."""
        u_c, u_w, u_east = u_e[:, 0], u_n[:, 0], u_n[:, 1]
        h, nu = self.h, self.nu
        u_left = self.config.boundary_left
        u_right = self.config.boundary_right
        is_left = elements == 0
        is_right = elements == self.n_cells - 1

        flux_right = np.where(
            is_right,
            0.5 * u_right**2 - 2.0 * nu * (u_right - u_c) / h,
            0.25 * (u_c**2 + u_east**2) - nu * (u_east - u_c) / h,
        )
        flux_left = np.where(
            is_left,
            0.5 * u_left**2 - 2.0 * nu * (u_c - u_left) / h,
            0.25 * (u_w**2 + u_c**2) - nu * (u_c - u_w) / h,
        )
        source = self.bumps[elements] @ mu[: self.config.n_design]
        residual = (
            flux_right - flux_left - h * source - h * self.forcing[elements]
        )
        return residual[:, None]

    def residual_derivatives(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        u_n: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> Tuple[
        npt.NDArray[np.float64],
        npt.NDArray[np.float64],
        npt.NDArray[np.float64],
    ]:
        """Derivatives w.r.t. the cell, its (west, east) neighbors and mu."""
        u_c, u_w, u_east = u_e[:, 0], u_n[:, 0], u_n[:, 1]
        h, nu = self.h, self.nu
        is_left = elements == 0
        is_right = elements == self.n_cells - 1

        d_own = np.where(is_right, 2.0 * nu / h, 0.5 * u_c + nu / h) - np.where(
            is_left, -2.0 * nu / h, 0.5 * u_c - nu / h
        )
        d_west = np.where(is_left, 0.0, -(0.5 * u_w + nu / h))
        d_east = np.where(is_right, 0.0, 0.5 * u_east - nu / h)

        d_mu = np.zeros((elements.size, 1, self.n_params))
        d_mu[:, 0, : self.config.n_design] = -h * self.bumps[elements]
        return (
            d_own[:, None, None],
            np.stack([d_west, d_east], axis=1)[:, None, :],
            d_mu,
        )

    def objective(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> npt.NDArray[np.float64]:
        """Tracking term h/2 (u_e - t_e)^2."""
        deviation = u_e[:, 0] - self.target[elements]
        return np.asarray(0.5 * self.h * deviation**2)

    def objective_derivatives(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """Tracking term derivatives, independent of mu."""
        deviation = u_e[:, 0] - self.target[elements]
        return (
            (self.h * deviation)[:, None],
            np.zeros((elements.size, self.n_params)),
        )

    def constraints(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> npt.NDArray[np.float64]:
        """Cell shares of the integral constraints.

        The right-hand side and the slack are split evenly over the cells so
        that the assembled constraint is integral - rhs (+ slack).
        """
        u_c = u_e[:, 0]
        values = np.zeros((elements.size, len(self.config.constraints)))
        for index, constraint in enumerate(self.config.constraints):
            integrand = (
                u_c if constraint.kind == IntegralKind.VOLUME else u_c**2
            )
            rhs = 0.0 if constraint.rhs is None else constraint.rhs
            values[:, index] = self.h * integrand - rhs / self.n_cells
            slack = self.layout.slack_of(index)
            if slack is not None:
                values[:, index] += mu[slack] / self.n_cells
        return values

    def constraint_derivatives(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """Derivatives of the cell shares w.r.t. the cell value and mu."""
        u_c = u_e[:, 0]
        n_c = len(self.config.constraints)
        d_u = np.zeros((elements.size, n_c, 1))
        d_mu = np.zeros((elements.size, n_c, self.n_params))
        for index, constraint in enumerate(self.config.constraints):
            if constraint.kind == IntegralKind.VOLUME:
                d_u[:, index, 0] = self.h
            else:
                d_u[:, index, 0] = 2.0 * self.h * u_c
            slack = self.layout.slack_of(index)
            if slack is not None:
                d_mu[:, index, slack] = 1.0 / self.n_cells
        return d_u, d_mu


def make_problem(config: BurgersConfig) -> Problem:
    """Assemble the testbed as element-decomposable problem.

    Args:
        config (BurgersConfig): testbed configuration

    Returns:
        Problem with one element per cell
    """
    n_cells = config.n_cells
    cells = np.arange(n_cells)
    west = np.where(cells > 0, cells - 1, -1)
    east = np.where(cells < n_cells - 1, cells + 1, -1)

    layout = slack_layout(config)
    lower = np.concatenate(
        [
            np.full(config.n_design, config.design_lower),
            np.zeros(config.n_slacks),
        ]
    )
    upper = np.concatenate(
        [
            np.full(config.n_design, config.design_upper),
            np.full(config.n_slacks, layout.upper_bound),
        ]
    )
    initial_state = config.boundary_left + (
        config.boundary_right - config.boundary_left
    ) * config.cell_centers

    return Problem(
        kernel=BurgersKernel(config),
        element_dofs=cells[:, None],
        neighbor_dofs=np.stack([west, east], axis=1),
        n_state=n_cells,
        n_constraints=len(config.constraints),
        param_lower=lower,
        param_upper=upper,
        volumes=np.full(n_cells, config.cell_width),
        initial_state=initial_state,
        name=f"burgers-{n_cells}",
    )


def full_parameters(
    config: BurgersConfig,
    design: npt.NDArray[np.float64],
    slacks: Optional[npt.NDArray[np.float64]] = None,
) -> npt.NDArray[np.float64]:
    """Parameter vector from source amplitudes and (zero default) slacks."""
    design = np.asarray(design, dtype=float).ravel()
    if design.size != config.n_design:
        raise ValueError(
            f"design vector has length {design.size}, expected "
            f"{config.n_design}."
        )
    if slacks is None:
        slacks = np.zeros(config.n_slacks)
    return np.concatenate([design, np.asarray(slacks, dtype=float).ravel()])


def generate_target(
    config: BurgersConfig, mu_true: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """Solve the testbed at the given source amplitudes.

    Args:
        config (BurgersConfig): testbed configuration
        mu_true (npt.NDArray[np.float64]): source amplitudes within bounds

    Returns:
        state u*(mu_true), used as target of the tracking objective
    """
    mu_true = np.asarray(mu_true, dtype=float).ravel()
    if np.any(mu_true < config.design_lower) or np.any(
        mu_true > config.design_upper
    ):
        raise ValueError("mu_true lies outside the design bounds.")
    problem = make_problem(config)
    return solve_primal(problem=problem, mu=full_parameters(config, mu_true))


def integral(
    config: BurgersConfig, kind: IntegralKind, u: npt.NDArray[np.float64]
) -> float:
    """Midpoint-rule integral of u or u^2."""
    integrand = u if kind == IntegralKind.VOLUME else u**2
    return float(config.cell_width * np.sum(integrand))


def calibrate(
    config: BurgersConfig, target_state: npt.NDArray[np.float64]
) -> BurgersConfig:
    """Set target and constraint right-hand sides from a target state.

    Each right-hand side is its factor times the corresponding integral of
    the target state.

    Args:
        config (BurgersConfig): testbed configuration
        target_state (npt.NDArray[np.float64]): generated target

    Returns:
        calibrated configuration
    """
    constraints = tuple(
        dataclasses.replace(
            constraint,
            rhs=constraint.factor
            * integral(config, constraint.kind, target_state),
        )
        for constraint in config.constraints
    )
    log.debug(
        "calibrated constraint right-hand sides "
        f"{[constraint.rhs for constraint in constraints]}"
    )
    return dataclasses.replace(
        config, target_state=target_state, constraints=constraints
    )


def prepare(config: BurgersConfig) -> Tuple[BurgersConfig, Problem]:
    """Generate the target, calibrate the constraints and build the problem."""
    if config.target_state is None:
        target = generate_target(config, config.true_design())
        config = calibrate(config, target)
    return config, make_problem(config)


def manufactured_forcing(
    config: BurgersConfig,
    u_manufactured: npt.NDArray[np.float64],
    mu: Optional[npt.NDArray[np.float64]] = None,
) -> npt.NDArray[np.float64]:
    """Per-cell forcing making u_manufactured an exact discrete solution."""
    unforced = dataclasses.replace(config, forcing=None)
    problem = make_problem(unforced)
    if mu is None:
        mu = np.zeros(config.n_params)
    elements = np.arange(config.n_cells)
    u_n = np.stack(
        [
            np.concatenate([[0.0], u_manufactured[:-1]]),
            np.concatenate([u_manufactured[1:], [0.0]]),
        ],
        axis=1,
    )
    residual = problem.kernel.residual(
        elements=elements, u_e=u_manufactured[:, None], u_n=u_n, mu=mu
    )[:, 0]
    return np.asarray(residual / config.cell_width)
