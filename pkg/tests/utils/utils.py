import pathlib
from typing import Callable, Optional, Tuple

import numpy as np
import numpy.typing as npt

from eqpal.data.problem import ElementKernel, Problem
from eqpal.methods.auglag import SubsolverMethod
from eqpal.methods.experiment import RunConfig
from helper.create_configs import create_run_config


class ChainKernel(ElementKernel):
    """Nonlinear reaction-diffusion chain with two sources.

    Element e owns state e and couples to e - 1 and e + 1, missing neighbors
    act as zero Dirichlet values:

        r_e = 2 u_e - u_{e-1} - u_{e+1} + beta u_e^3 - h^2 (mu_0 + mu_1 x_e)
        j_e = h/2 (u_e - t_e)^2 + gamma h/2 |mu|^2
        c_e = (h u_e^2 - q / n, h u_e + eta mu_1 / n - v / n)
    """

    def __init__(
        self,
        n_elements: int,
        *,
        beta: float = 1.0,
        gamma: float = 1e-3,
        eta: float = 0.1,
        target: float = 0.05,
        q_rhs: float = 1e-3,
        v_rhs: float = 0.02,
    ):
        self.n = n_elements
        self.h = 1.0 / (n_elements + 1)
        self.x = (np.arange(n_elements) + 1) * self.h
        self.beta = beta
        self.gamma = gamma
        self.eta = eta
        self.target = np.full(n_elements, target)
        self.q_rhs = q_rhs
        self.v_rhs = v_rhs

    def residual(self, *, elements, u_e, u_n, mu):
        u_c = u_e[:, 0]
        source = self.h**2 * (mu[0] + mu[1] * self.x[elements])
        value = (
            2.0 * u_c - u_n[:, 0] - u_n[:, 1] + self.beta * u_c**3 - source
        )
        return value[:, None]

    def residual_derivatives(self, *, elements, u_e, u_n, mu):
        u_c = u_e[:, 0]
        d_own = (2.0 + 3.0 * self.beta * u_c**2)[:, None, None]
        d_neighbor = np.full((elements.size, 1, 2), -1.0)
        d_mu = np.stack(
            [
                np.full(elements.size, -self.h**2),
                -self.h**2 * self.x[elements],
            ],
            axis=1,
        )[:, None, :]
        return d_own, d_neighbor, d_mu

    def objective(self, *, elements, u_e, mu):
        deviation = u_e[:, 0] - self.target[elements]
        return 0.5 * self.h * deviation**2 + 0.5 * self.gamma * self.h * (
            mu @ mu
        )

    def objective_derivatives(self, *, elements, u_e, mu):
        deviation = u_e[:, 0] - self.target[elements]
        return (
            (self.h * deviation)[:, None],
            np.tile(self.gamma * self.h * mu, (elements.size, 1)),
        )

    def constraints(self, *, elements, u_e, mu):
        u_c = u_e[:, 0]
        return np.stack(
            [
                self.h * u_c**2 - self.q_rhs / self.n,
                self.h * u_c
                + self.eta * mu[1] / self.n
                - self.v_rhs / self.n,
            ],
            axis=1,
        )

    def constraint_derivatives(self, *, elements, u_e, mu):
        u_c = u_e[:, 0]
        d_u = np.stack([2.0 * self.h * u_c, np.full(elements.size, self.h)], 1)
        d_mu = np.zeros((elements.size, 2, 2))
        d_mu[:, 1, 1] = self.eta / self.n
        return d_u[:, :, None], d_mu


def get_chain_problem(
    *, n_elements: int = 8, beta: float = 1.0, bound: float = 2.0
) -> Problem:
    elements = np.arange(n_elements)
    west = np.where(elements > 0, elements - 1, -1)
    east = np.where(elements < n_elements - 1, elements + 1, -1)
    kernel = ChainKernel(n_elements, beta=beta)
    return Problem(
        kernel=kernel,
        element_dofs=elements[:, None],
        neighbor_dofs=np.stack([west, east], axis=1),
        n_state=n_elements,
        n_constraints=2,
        param_lower=np.full(2, -bound),
        param_upper=np.full(2, bound),
        volumes=np.full(n_elements, kernel.h),
        initial_state=np.zeros(n_elements),
        name=f"chain-{n_elements}",
    )


def finite_difference_gradient(
    function: Callable[[npt.NDArray[np.float64]], float],
    x: npt.NDArray[np.float64],
    step: float = 1e-6,
) -> npt.NDArray[np.float64]:
    """Central differences of a scalar function."""
    gradient = np.zeros(x.size)
    for index in range(x.size):
        offset = np.zeros(x.size)
        offset[index] = step
        gradient[index] = (function(x + offset) - function(x - offset)) / (
            2.0 * step
        )
    return gradient


def finite_difference_jacobian(
    function: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]],
    x: npt.NDArray[np.float64],
    step: float = 1e-6,
) -> npt.NDArray[np.float64]:
    """Central differences of a vector function, one column per input."""
    columns = []
    for index in range(x.size):
        offset = np.zeros(x.size)
        offset[index] = step
        columns.append(
            (function(x + offset) - function(x - offset)) / (2.0 * step)
        )
    return np.stack(columns, axis=-1)


def get_small_run_config(
    *,
    method: SubsolverMethod,
    output_directory: pathlib.Path = pathlib.Path("results"),
    max_major_iters: int = 2,
    max_tr_iters: int = 3,
    n_cells: int = 24,
    n_design: int = 3,
    label: Optional[str] = None,
) -> RunConfig:
    return create_run_config(
        method=method,
        n_cells=n_cells,
        n_design=n_design,
        max_major_iters=max_major_iters,
        max_tr_iters=max_tr_iters,
        output_directory=output_directory,
        label=label,
    )


def quadratic_objective(
    hessian: npt.NDArray[np.float64], gradient: npt.NDArray[np.float64]
) -> Tuple[
    Callable[[npt.NDArray[np.float64]], float],
    Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]],
]:
    """f(x) = g^T x + 1/2 x^T H x and its gradient."""

    def value(x: npt.NDArray[np.float64]) -> float:
        return float(gradient @ x + 0.5 * x @ hessian @ x)

    def derivative(x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return gradient + hessian @ x

    return value, derivative
