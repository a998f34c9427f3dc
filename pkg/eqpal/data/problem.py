"""Module handling the element-decomposable systems of the optimization."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt


class ElementKernel(ABC):
    """Element-level callbacks of an element-decomposable nonlinear system.

    All callbacks are batched over elements: ``elements`` holds the indices
    of the evaluated elements, ``u_e`` the gathered element states (shape
    ``(n_e, k)``) and ``u_n`` the gathered neighbor states (shape
    ``(n_e, m)``). Neighbor entries without a state index are filled with
    zero, the kernel is responsible for boundary handling.

    Note:
        Implementations must be free of shared mutable state, a kernel may
        be evaluated from several threads at once.
    """

    @abstractmethod
    def residual(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        u_n: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> npt.NDArray[np.float64]:
        """Element residuals r_e(u_e, u_e', mu), shape (n_e, k)."""

    @abstractmethod
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
        """Derivatives of the element residuals.

        Returns:
            Tuple of dr_e/du_e (n_e, k, k), dr_e/du_e' (n_e, k, m) and
            dr_e/dmu (n_e, k, n_params)
        """

    @abstractmethod
    def objective(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> npt.NDArray[np.float64]:
        """Element objective contributions j_e(u_e, mu), shape (n_e,)."""

    @abstractmethod
    def objective_derivatives(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """Derivatives dj_e/du_e (n_e, k) and dj_e/dmu (n_e, n_params)."""

    @abstractmethod
    def constraints(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> npt.NDArray[np.float64]:
        """Element side-constraint contributions c_e, shape (n_e, n_c)."""

    @abstractmethod
    def constraint_derivatives(
        self,
        *,
        elements: npt.NDArray[np.int64],
        u_e: npt.NDArray[np.float64],
        mu: npt.NDArray[np.float64],
    ) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """Derivatives dc_e/du_e (n_e, n_c, k) and dc_e/dmu (n_e, n_c, n_p)."""


@dataclass(frozen=True)
class Problem:
    """Element-decomposable nonlinear system with objective and constraints.

    The gather/scatter maps P_e and P_e' are realized as index arrays:
    ``element_dofs[e]`` holds the state indices owned by element e (its
    residual is scattered there), ``neighbor_dofs[e]`` the state indices of
    the coupled neighbors, where -1 marks a missing neighbor (boundary).

    Args:
        kernel (ElementKernel): element callbacks
        element_dofs (npt.NDArray[np.int64]): P_e index map, shape (n_e, k)
        neighbor_dofs (npt.NDArray[np.int64]): P_e' index map, shape (n_e, m)
        n_state (int): number of state unknowns
        n_constraints (int): number of side constraints
        param_lower (npt.NDArray[np.float64]): lower parameter bounds
        param_upper (npt.NDArray[np.float64]): upper parameter bounds
        volumes (npt.NDArray[np.float64]): element volumes |Omega_e|
        initial_state (npt.NDArray[np.float64]): fallback Newton guess
        name (str): human readable identifier
    """

    kernel: ElementKernel
    element_dofs: npt.NDArray[np.int64]
    neighbor_dofs: npt.NDArray[np.int64]
    n_state: int
    n_constraints: int
    param_lower: npt.NDArray[np.float64]
    param_upper: npt.NDArray[np.float64]
    volumes: npt.NDArray[np.float64]
    initial_state: npt.NDArray[np.float64]
    name: str = "problem"

    def __post_init__(self) -> None:
        """Validates the index maps and bounds, freezes the arrays."""
        element_dofs = np.atleast_2d(np.array(self.element_dofs, dtype=int))
        neighbor_dofs = np.array(self.neighbor_dofs, dtype=int)
        if neighbor_dofs.ndim == 1:
            neighbor_dofs = neighbor_dofs.reshape(element_dofs.shape[0], -1)
        lower = np.array(self.param_lower, dtype=float).ravel()
        upper = np.array(self.param_upper, dtype=float).ravel()
        volumes = np.array(self.volumes, dtype=float).ravel()
        initial_state = np.array(self.initial_state, dtype=float).ravel()

        if neighbor_dofs.shape[0] != element_dofs.shape[0]:
            raise ValueError(
                f"neighbor map has {neighbor_dofs.shape[0]} rows, but there "
                f"are {element_dofs.shape[0]} elements."
            )
        if np.any(element_dofs < 0) or np.any(element_dofs >= self.n_state):
            raise ValueError(
                f"element map references indices outside [0, {self.n_state})."
            )
        if np.any(neighbor_dofs < -1) or np.any(
            neighbor_dofs >= self.n_state
        ):
            raise ValueError(
                "neighbor map references indices outside "
                f"[-1, {self.n_state})."
            )
        covered = np.zeros(self.n_state, dtype=bool)
        covered[element_dofs.ravel()] = True
        if not covered.all():
            raise ValueError(
                "Every state index must be owned by at least one element, "
                f"indices {np.flatnonzero(~covered).tolist()} are not."
            )
        if lower.shape != upper.shape:
            raise ValueError(
                f"parameter bounds differ in length: {lower.size} vs "
                f"{upper.size}."
            )
        if np.any(lower > upper):
            raise ValueError(
                "lower parameter bound exceeds the upper bound for indices "
                f"{np.flatnonzero(lower > upper).tolist()}."
            )
        if volumes.size != element_dofs.shape[0]:
            raise ValueError(
                f"expected {element_dofs.shape[0]} element volumes, got "
                f"{volumes.size}."
            )
        if initial_state.size != self.n_state:
            raise ValueError(
                f"initial state has length {initial_state.size}, expected "
                f"{self.n_state}."
            )

        for name, value in (
            ("element_dofs", element_dofs),
            ("neighbor_dofs", neighbor_dofs),
            ("param_lower", lower),
            ("param_upper", upper),
            ("volumes", volumes),
            ("initial_state", initial_state),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_elements(self) -> int:
        """Number of elements N_e."""
        return int(self.element_dofs.shape[0])

    @property
    def n_params(self) -> int:
        """Number of parameters N_mu."""
        return int(self.param_lower.size)

    @property
    def total_volume(self) -> float:
        """Domain volume |Omega| as the sum of the element volumes."""
        return float(np.sum(self.volumes))

    def check_state(self, u: npt.NDArray[np.float64]) -> None:
        """Raises a ValueError if u is not a state vector of this problem."""
        if np.shape(u) != (self.n_state,):
            raise ValueError(
                f"state vector has shape {np.shape(u)}, expected "
                f"({self.n_state},)."
            )

    def check_params(self, mu: npt.NDArray[np.float64]) -> None:
        """Raises a ValueError if mu is not a parameter vector."""
        if np.shape(mu) != (self.n_params,):
            raise ValueError(
                f"parameter vector has shape {np.shape(mu)}, expected "
                f"({self.n_params},)."
            )

    def in_bounds(self, mu: npt.NDArray[np.float64]) -> bool:
        """Whether mu lies in the parameter box."""
        return bool(
            np.all(mu >= self.param_lower) and np.all(mu <= self.param_upper)
        )


@dataclass(frozen=True)
class ALContext:
    """Multiplier estimate and penalty of the augmented Lagrangian.

    Both are frozen during one major iteration.

    Args:
        theta (npt.NDArray[np.float64]): Lagrange multiplier estimate
        tau (float): penalty parameter, tau = 0 evaluates the pure
            Lagrangian
    """

    theta: npt.NDArray[np.float64]
    tau: float

    def __post_init__(self) -> None:
        """Validates the penalty parameter."""
        theta = np.array(self.theta, dtype=float).ravel()
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValueError(
                f"penalty parameter must be non-negative, got {self.tau}."
            )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "tau", float(self.tau))

    @staticmethod
    def initial(*, n_constraints: int, tau: float) -> ALContext:
        """Context with zero multipliers."""
        return ALContext(theta=np.zeros(n_constraints), tau=tau)


@dataclass(frozen=True)
class PrimalAdjointPair:
    """Converged primal and adjoint state at one parameter point.

    Attributes:
        u_star (npt.NDArray[np.float64]): primal solution
        lambda_star (npt.NDArray[np.float64]): adjoint solution
        mu (npt.NDArray[np.float64]): parameter at which both were solved
    """

    u_star: npt.NDArray[np.float64]
    lambda_star: npt.NDArray[np.float64]
    mu: npt.NDArray[np.float64]
