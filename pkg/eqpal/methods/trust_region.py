"""Bound-constrained trust-region method with inexact models."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import numpy.typing as npt

log = logging.getLogger(__name__)

HessVec = Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]
Objective = Callable[[npt.NDArray[np.float64]], float]

RADIUS_GROWTH = 2.0
CG_RELATIVE_TOLERANCE = 1e-8
ZERO_DIRECTION_NORM = 1e-14
CAUCHY_DECREASE_SLACK = 1e-14
CHI_GAP_SLACK = 1e-12


@dataclass(frozen=True)
class TrConfig:  # pylint: disable=too-many-instance-attributes
    """Parameters of the trust-region method.

    Args:
        delta0 (float): initial radius
        eta1 (float): acceptance threshold of the reduction ratio
        eta2 (float): threshold above which the radius grows
        gamma1 (float): shrink factor on rejection
        gamma2 (float): factor for accepted steps below eta2
        delta_max (float): largest admissible radius
        max_iters (int): iteration cap of one solve
        kappa_hat (float): bound on the model error indicator
        power_iterations (int): steps of the Hessian norm estimate
        kappa_cauchy (float): constant of the fraction of Cauchy decrease
    """

    delta0: float = 0.1
    eta1: float = 0.1
    eta2: float = 0.75
    gamma1: float = 0.5
    gamma2: float = 1.0
    delta_max: float = 10.0
    max_iters: int = 50
    kappa_hat: float = 1e-6
    power_iterations: int = 20
    kappa_cauchy: float = 0.25

    def __post_init__(self) -> None:
        """Validates the parameter relations."""
        if not 0 < self.gamma1 <= self.gamma2 <= 1:
            raise ValueError(
                f"need 0 < gamma1 <= gamma2 <= 1, got gamma1={self.gamma1}, "
                f"gamma2={self.gamma2}."
            )
        if not 0 < self.eta1 < self.eta2 < 1:
            raise ValueError(
                f"need 0 < eta1 < eta2 < 1, got eta1={self.eta1}, "
                f"eta2={self.eta2}."
            )
        if self.delta_max <= 0 or not 0 < self.delta0 <= self.delta_max:
            raise ValueError(
                f"need 0 < delta0 <= delta_max, got delta0={self.delta0}, "
                f"delta_max={self.delta_max}."
            )
        if self.max_iters < 0 or self.power_iterations < 1:
            raise ValueError(
                "max_iters must be non-negative and power_iterations "
                "positive."
            )
        if self.kappa_hat <= 0 or self.kappa_cauchy <= 0:
            raise ValueError("kappa_hat and kappa_cauchy must be positive.")


@dataclass(frozen=True)
class ModelHandle:  # pylint: disable=too-many-instance-attributes
    """Quadratic model m(mu) = value + g^T s + 1/2 s^T H s, s = mu - center.

    Args:
        center (npt.NDArray[np.float64]): expansion point
        value (float): model value at the center
        gradient (npt.NDArray[np.float64]): model gradient at the center
        hessvec (HessVec): Hessian-vector product
        error_indicator (float): computable model error bound phi_k
        true_gradient (Optional[npt.NDArray[np.float64]]): gradient of the
            true objective at the center, if it was computed while building
            the model
        basis_size (int): reduced basis size, 0 for exact models
        usage_fraction (float): fraction of elements with nonzero weight
        details (Dict[str, Any]): additional quantities for the trace
    """

    center: npt.NDArray[np.float64]
    value: float
    gradient: npt.NDArray[np.float64]
    hessvec: HessVec
    error_indicator: float = 0.0
    true_gradient: Optional[npt.NDArray[np.float64]] = None
    basis_size: int = 0
    usage_fraction: float = 1.0
    details: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Freezes the center and gradients."""
        for name in ("center", "gradient", "true_gradient"):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.array(value, dtype=float)
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        if self.gradient.shape != self.center.shape:
            raise ValueError(
                f"model gradient has shape {self.gradient.shape}, expected "
                f"{self.center.shape}."
            )

    def hess(
        self, direction: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        """Hessian-vector product, zero for vanishing directions."""
        direction = np.asarray(direction, dtype=float)
        if np.linalg.norm(direction) < ZERO_DIRECTION_NORM:
            return np.zeros_like(direction)
        return np.asarray(self.hessvec(direction), dtype=float)

    def evaluate(self, mu: npt.NDArray[np.float64]) -> float:
        """Model value at mu."""
        step = np.asarray(mu, dtype=float) - self.center
        return float(
            self.value + self.gradient @ step + 0.5 * step @ self.hess(step)
        )

    def gradient_at(
        self, mu: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        """Model gradient at mu."""
        step = np.asarray(mu, dtype=float) - self.center
        return self.gradient + self.hess(step)


@dataclass(frozen=True)
class TrState:
    """Iterate of the trust-region method.

    Attributes:
        center (npt.NDArray[np.float64]): current center mu_k
        radius (float): current radius Delta_k
        f_center (float): true objective at the center
        lagged_chi (float): model criticality of the previous iteration,
            infinite before the first model was built
        lagged_radius (float): radius of the previous iteration
        iteration (int): number of completed iterations
        n_accepted (int): number of accepted steps
    """

    center: npt.NDArray[np.float64]
    radius: float
    f_center: float
    lagged_chi: float
    lagged_radius: float
    iteration: int = 0
    n_accepted: int = 0

    def __post_init__(self) -> None:
        """Freezes the center."""
        center = np.array(self.center, dtype=float)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)

    @staticmethod
    def initial(
        *, mu0: npt.NDArray[np.float64], f0: float, config: TrConfig
    ) -> TrState:
        """State before the first iteration."""
        return TrState(
            center=mu0,
            radius=config.delta0,
            f_center=f0,
            lagged_chi=np.inf,
            lagged_radius=config.delta0,
        )

    def schedule_inputs(self) -> Tuple[float, float]:
        """Lagged (criticality, radius) pair for the tolerance schedule."""
        return self.lagged_chi, self.lagged_radius


@dataclass(frozen=True)
class TrRecord:  # pylint: disable=too-many-instance-attributes
    """One trust-region iteration."""

    iteration: int
    radius: float
    radius_next: float
    ratio: float
    accepted: bool
    predicted_decrease: float
    actual_decrease: float
    f_center: float
    f_candidate: float
    chi_m: float
    chi_true: float
    beta: float
    cauchy_decrease_ok: bool
    chi_gap_ok: bool
    basis_size: int
    usage_fraction: float
    error_indicator: float
    error_bound_ok: bool
    details: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        """Flat mapping for the iteration trace."""
        return {
            "iteration": self.iteration,
            "radius": self.radius,
            "radius_next": self.radius_next,
            "ratio": self.ratio,
            "accepted": self.accepted,
            "predicted_decrease": self.predicted_decrease,
            "actual_decrease": self.actual_decrease,
            "f_center": self.f_center,
            "f_candidate": self.f_candidate,
            "chi_m": self.chi_m,
            "chi_true": self.chi_true,
            "beta": self.beta,
            "cauchy_decrease_ok": self.cauchy_decrease_ok,
            "chi_gap_ok": self.chi_gap_ok,
            "basis_size": self.basis_size,
            "usage_fraction": self.usage_fraction,
            "error_indicator": self.error_indicator,
            "error_bound_ok": self.error_bound_ok,
            **self.details,
        }


@dataclass(frozen=True)
class TrOutcome:
    """Result of :func:`run`.

    Attributes:
        mu (npt.NDArray[np.float64]): final center
        f (float): true objective at the final center
        chi (float): infinity norm of the true criticality at the final center
        converged (bool): whether chi dropped below the stop tolerance
        records (Tuple[TrRecord, ...]): iteration trace
        state (TrState): final state
    """

    mu: npt.NDArray[np.float64]
    f: float
    chi: float
    converged: bool
    records: Tuple[TrRecord, ...]
    state: TrState

    @property
    def iterations(self) -> int:
        """Number of trust-region steps taken."""
        return len(self.records)


@dataclass(frozen=True)
class SubproblemStep:
    """Approximate solution of the trust-region subproblem.

    Attributes:
        candidate (npt.NDArray[np.float64]): trial point
        predicted_decrease (float): m(center) - m(candidate)
        cauchy_decrease (float): model decrease of the Cauchy point
    """

    candidate: npt.NDArray[np.float64]
    predicted_decrease: float
    cauchy_decrease: float


def project_box(
    x: npt.NDArray[np.float64],
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """Euclidean projection onto the box [lower, upper].

    Args:
        x (npt.NDArray[np.float64]): point to project
        lower (npt.NDArray[np.float64]): lower bounds
        upper (npt.NDArray[np.float64]): upper bounds

    Returns:
        componentwise clamp of x
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise ValueError("lower bounds must not exceed upper bounds.")
    return np.minimum(np.maximum(np.asarray(x, dtype=float), lower), upper)


def criticality(
    mu: npt.NDArray[np.float64],
    grad: npt.NDArray[np.float64],
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """Projected gradient criticality P(mu - grad) - mu."""
    mu = np.asarray(mu, dtype=float)
    return project_box(mu - np.asarray(grad, dtype=float), lower, upper) - mu


def estimate_hessian_norm(
    hessvec: HessVec,
    n: int,
    iterations: int = 20,
    *,
    start: Optional[npt.NDArray[np.float64]] = None,
) -> float:
    """Estimate beta = 1 + |H| with power iteration.

    Args:
        hessvec (HessVec): Hessian-vector product
        n (int): dimension
        iterations (int): number of power steps
        start (Optional[npt.NDArray[np.float64]]): start vector, the
            normalized ones vector if None

    Returns:
        1 plus the largest observed |H v| over unit vectors v
    """
    if n == 0:
        return 1.0
    vector = np.ones(n) if start is None else np.array(start, dtype=float)
    vector /= np.linalg.norm(vector)
    estimate = 0.0
    for _ in range(iterations):
        image = np.asarray(hessvec(vector), dtype=float)
        norm = float(np.linalg.norm(image))
        estimate = max(estimate, norm)
        if norm == 0.0:
            break
        vector = image / norm
    return 1.0 + estimate


def cauchy_decrease_holds(
    *,
    decrease: float,
    chi_norm: float,
    beta: float,
    radius: float,
    kappa: float = 0.25,
) -> bool:
    """Check m(mu_k) - m(mu) >= kappa chi min(chi / beta, Delta)."""
    required = kappa * chi_norm * min(chi_norm / beta, radius)
    return bool(
        decrease >= required - CAUCHY_DECREASE_SLACK * max(1.0, abs(decrease))
    )


def generalized_cauchy_point(
    model: ModelHandle,
    mu_k: npt.NDArray[np.float64],
    delta: float,
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """First local minimizer of the model along the projected gradient path.

    The path P(mu_k - t g) is restricted to the intersection of the parameter
    box with the infinity-norm trust region and searched segment by segment.

    Args:
        model (ModelHandle): quadratic model
        mu_k (npt.NDArray[np.float64]): center
        delta (float): trust-region radius
        lower (npt.NDArray[np.float64]): lower parameter bounds
        upper (npt.NDArray[np.float64]): upper parameter bounds

    Returns:
        generalized Cauchy point
    """
    mu_k = np.asarray(mu_k, dtype=float)
    step, _ = _cauchy_step(model, mu_k, delta, lower, upper)
    return mu_k + step


def solve_subproblem(  # pylint: disable=too-many-locals
    model: ModelHandle,
    mu_k: npt.NDArray[np.float64],
    delta: float,
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
    *,
    beta: Optional[float] = None,
    max_cg_iters: Optional[int] = None,
) -> SubproblemStep:
    """Active-set truncated CG started at the generalized Cauchy point.

    Variables active at the Cauchy point stay fixed. CG runs on the free
    variables until the residual dropped by 1e-8, negative curvature is
    met (step to the boundary), or 2 * n iterations. Hitting a face fixes
    the blocking variable and restarts CG. If beta is given and the Cauchy
    point misses the fraction of Cauchy decrease, the projected gradient
    step of length 1/beta is used instead when it decreases the model more.

    Args:
        model (ModelHandle): quadratic model
        mu_k (npt.NDArray[np.float64]): center
        delta (float): trust-region radius
        lower (npt.NDArray[np.float64]): lower parameter bounds
        upper (npt.NDArray[np.float64]): upper parameter bounds
        beta (Optional[float]): Hessian norm bound for the safeguard
        max_cg_iters (Optional[int]): CG iteration cap, 2 * n if None

    Returns:
        candidate with its predicted and Cauchy model decrease
    """
    if delta <= 0:
        raise ValueError(f"trust-region radius must be positive, got {delta}.")
    mu_k = np.asarray(mu_k, dtype=float)
    gradient = model.gradient_at(mu_k)
    lo, hi = _trust_box(mu_k, delta, lower, upper)

    step, hs = _cauchy_step(model, mu_k, delta, lower, upper)
    cauchy_value = _quadratic(gradient, step, hs)
    if beta is not None:
        chi_norm = float(
            np.linalg.norm(criticality(mu_k, gradient, lower, upper))
        )
        if not cauchy_decrease_holds(
            decrease=-cauchy_value, chi_norm=chi_norm, beta=beta, radius=delta
        ):
            short = project_box(mu_k - gradient / beta, lo, hi) - mu_k
            short_hs = model.hess(short)
            short_value = _quadratic(gradient, short, short_hs)
            if short_value < cauchy_value:
                step, hs, cauchy_value = short, short_hs, short_value

    n = mu_k.size
    max_cg_iters = 2 * n if max_cg_iters is None else max_cg_iters
    cg_step = step.copy()
    cg_hs = hs.copy()
    tolerance = 1e-12 * np.maximum(1.0, np.abs(mu_k))
    fixed = (mu_k + cg_step <= lo + tolerance) | (
        mu_k + cg_step >= hi - tolerance
    )

    residual = np.where(fixed, 0.0, gradient + cg_hs)
    initial_norm = float(np.linalg.norm(residual))
    direction = -residual
    for _ in range(max_cg_iters):
        if float(np.linalg.norm(residual)) <= max(
            CG_RELATIVE_TOLERANCE * initial_norm, ZERO_DIRECTION_NORM
        ):
            break
        h_direction = model.hess(direction)
        curvature = float(direction @ h_direction)
        max_step, blocking = _max_feasible_step(
            mu_k + cg_step, direction, lo, hi
        )
        if curvature <= 0:
            if np.isfinite(max_step):
                cg_step += max_step * direction
                cg_hs += max_step * h_direction
            break
        alpha = float(residual @ residual) / curvature
        if alpha >= max_step:
            cg_step += max_step * direction
            cg_hs += max_step * h_direction
            fixed[blocking] = True
            residual = np.where(fixed, 0.0, gradient + cg_hs)
            direction = -residual
            continue
        cg_step += alpha * direction
        cg_hs += alpha * h_direction
        new_residual = np.where(fixed, 0.0, residual + alpha * h_direction)
        ratio = float(new_residual @ new_residual) / float(
            residual @ residual
        )
        direction = -new_residual + ratio * direction
        residual = new_residual

    cg_step = project_box(mu_k + cg_step, lo, hi) - mu_k
    cg_value = _quadratic(gradient, cg_step, model.hess(cg_step))
    if cg_value > cauchy_value:
        cg_step, cg_value = step, cauchy_value
    return SubproblemStep(
        candidate=mu_k + cg_step,
        predicted_decrease=-cg_value,
        cauchy_decrease=-cauchy_value,
    )


def tr_step(
    *,
    state: TrState,
    model_builder: Callable[[TrState], ModelHandle],
    objective: Objective,
    config: TrConfig,
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
    rng: Optional[np.random.Generator] = None,
) -> Tuple[TrState, TrRecord]:
    """One trust-region iteration: build model, solve subproblem, update.

    Args:
        state (TrState): current iterate
        model_builder (Callable[[TrState], ModelHandle]): model at the center
        objective (Objective): true objective F
        config (TrConfig): parameters
        lower (npt.NDArray[np.float64]): lower parameter bounds
        upper (npt.NDArray[np.float64]): upper parameter bounds
        rng (Optional[np.random.Generator]): source of the power iteration
            start vector, the ones vector if None

    Returns:
        Tuple of the updated state and the iteration record
    """
    model = model_builder(state)
    gradient = _stop_gradient(model)
    chi_true = float(
        np.linalg.norm(
            criticality(state.center, gradient, lower, upper), np.inf
        )
    )
    return _advance(
        state=state,
        model=model,
        objective=objective,
        config=config,
        lower=lower,
        upper=upper,
        chi_true=chi_true,
        rng=rng,
    )


def run(
    *,
    mu0: npt.NDArray[np.float64],
    model_builder: Callable[[TrState], ModelHandle],
    objective: Objective,
    config: TrConfig,
    omega: float,
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
    f0: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> TrOutcome:
    """Run the trust-region method until |P(mu - grad F) - mu|_inf <= omega.

    The stop test uses the true gradient whenever the model supplies it at
    its center, otherwise the model gradient.

    Args:
        mu0 (npt.NDArray[np.float64]): start point inside the box
        model_builder (Callable[[TrState], ModelHandle]): model at the center
        objective (Objective): true objective F
        config (TrConfig): parameters
        omega (float): stop tolerance
        lower (npt.NDArray[np.float64]): lower parameter bounds
        upper (npt.NDArray[np.float64]): upper parameter bounds
        f0 (Optional[float]): F(mu0), evaluated if None
        rng (Optional[np.random.Generator]): power iteration start source

    Returns:
        final center with trace
    """
    mu0 = np.asarray(mu0, dtype=float)
    if np.any(mu0 < lower) or np.any(mu0 > upper):
        raise ValueError("trust-region start point is not in the box.")
    state = TrState.initial(
        mu0=mu0, f0=objective(mu0) if f0 is None else f0, config=config
    )
    records = []
    converged = False
    chi_true = np.inf
    for iteration in range(config.max_iters + 1):
        model = model_builder(state)
        gradient = _stop_gradient(model)
        chi_true = float(
            np.linalg.norm(
                criticality(state.center, gradient, lower, upper), np.inf
            )
        )
        if chi_true <= omega:
            converged = True
            break
        if iteration == config.max_iters:
            break
        state, record = _advance(
            state=state,
            model=model,
            objective=objective,
            config=config,
            lower=lower,
            upper=upper,
            chi_true=chi_true,
            rng=rng,
        )
        records.append(record)

    log.debug(
        f"trust-region solve stopped after {len(records)} iterations with "
        f"|chi|_inf = {chi_true:.3e} (converged: {converged})."
    )
    return TrOutcome(
        mu=state.center,
        f=state.f_center,
        chi=chi_true,
        converged=converged,
        records=tuple(records),
        state=state,
    )


def _advance(  # pylint: disable=too-many-locals
    *,
    state: TrState,
    model: ModelHandle,
    objective: Objective,
    config: TrConfig,
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
    chi_true: float,
    rng: Optional[np.random.Generator],
) -> Tuple[TrState, TrRecord]:
    center = state.center
    radius = state.radius
    n = center.size
    start = None if rng is None else rng.standard_normal(n)
    beta = estimate_hessian_norm(
        model.hess, n, config.power_iterations, start=start
    )
    chi_m_vector = criticality(center, model.gradient, lower, upper)
    chi_m = float(np.linalg.norm(chi_m_vector))

    chi_gap_ok = True
    if model.true_gradient is not None:
        chi_gap = float(
            np.linalg.norm(
                chi_m_vector
                - criticality(center, model.true_gradient, lower, upper)
            )
        )
        chi_gap_ok = chi_gap <= float(
            np.linalg.norm(model.gradient - model.true_gradient)
        ) + CHI_GAP_SLACK * max(1.0, chi_m)

    step = solve_subproblem(model, center, radius, lower, upper, beta=beta)
    predicted = step.predicted_decrease
    cauchy_ok = cauchy_decrease_holds(
        decrease=predicted,
        chi_norm=chi_m,
        beta=beta,
        radius=radius,
        kappa=config.kappa_cauchy,
    )
    if not cauchy_ok:
        log.warning(
            f"candidate misses the fraction of Cauchy decrease "
            f"(decrease {predicted:.3e}, |chi_m| {chi_m:.3e})."
        )

    f_candidate = np.nan
    actual = np.nan
    ratio = np.nan
    if predicted > 0:
        f_candidate = float(objective(step.candidate))
        actual = state.f_center - f_candidate
        ratio = actual / predicted
    else:
        log.warning(
            f"zero predicted decrease at iteration {state.iteration}, "
            "treating the step as failed."
        )
    accepted = bool(predicted > 0 and ratio >= config.eta1)

    if not accepted:
        radius_next = config.gamma1 * radius
    elif ratio < config.eta2:
        radius_next = config.gamma2 * radius
    else:
        radius_next = min(RADIUS_GROWTH * radius, config.delta_max)

    log.debug(
        f"TR iteration {state.iteration}: radius {radius:.3e}, ratio "
        f"{ratio:.3e}, accepted {accepted}."
    )
    record = TrRecord(
        iteration=state.iteration,
        radius=radius,
        radius_next=radius_next,
        ratio=float(ratio),
        accepted=accepted,
        predicted_decrease=float(predicted),
        actual_decrease=float(actual),
        f_center=state.f_center,
        f_candidate=float(f_candidate),
        chi_m=chi_m,
        chi_true=chi_true,
        beta=beta,
        cauchy_decrease_ok=cauchy_ok,
        chi_gap_ok=bool(chi_gap_ok),
        basis_size=model.basis_size,
        usage_fraction=model.usage_fraction,
        error_indicator=model.error_indicator,
        error_bound_ok=bool(
            model.error_indicator
            <= config.kappa_hat
            * min(state.lagged_chi, state.lagged_radius)
            * (1.0 + CHI_GAP_SLACK)
        ),
        details=dict(model.details),
    )
    next_state = TrState(
        center=step.candidate if accepted else center,
        radius=radius_next,
        f_center=float(f_candidate) if accepted else state.f_center,
        lagged_chi=chi_m,
        lagged_radius=radius,
        iteration=state.iteration + 1,
        n_accepted=state.n_accepted + int(accepted),
    )
    return next_state, record


def _stop_gradient(model: ModelHandle) -> npt.NDArray[np.float64]:
    if model.true_gradient is not None:
        return model.true_gradient
    return model.gradient


def _trust_box(
    center: npt.NDArray[np.float64],
    delta: float,
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    return np.maximum(lower, center - delta), np.minimum(upper, center + delta)


def _quadratic(
    gradient: npt.NDArray[np.float64],
    step: npt.NDArray[np.float64],
    h_step: npt.NDArray[np.float64],
) -> float:
    return float(gradient @ step + 0.5 * step @ h_step)


def _cauchy_step(
    model: ModelHandle,
    mu_k: npt.NDArray[np.float64],
    delta: float,
    lower: npt.NDArray[np.float64],
    upper: npt.NDArray[np.float64],
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    if delta <= 0:
        raise ValueError(f"trust-region radius must be positive, got {delta}.")
    gradient = model.gradient_at(mu_k)
    lo, hi = _trust_box(mu_k, delta, lower, upper)
    step = np.zeros_like(mu_k)
    h_step = np.zeros_like(mu_k)
    if not np.any(gradient):
        return step, h_step

    with np.errstate(divide="ignore", invalid="ignore"):
        breaks = np.where(
            gradient > 0,
            (mu_k - lo) / gradient,
            np.where(gradient < 0, (mu_k - hi) / gradient, np.inf),
        )
    breaks = np.maximum(breaks, 0.0)

    t_previous = 0.0
    for t_next in np.unique(breaks[np.isfinite(breaks)]):
        if t_next <= t_previous:
            continue
        direction = np.where(breaks > t_previous, -gradient, 0.0)
        if np.linalg.norm(direction) < ZERO_DIRECTION_NORM:
            break
        h_direction = model.hess(direction)
        slope = float(gradient @ direction + h_step @ direction)
        curvature = float(direction @ h_direction)
        if slope >= 0:
            break
        span = t_next - t_previous
        if curvature > 0 and -slope / curvature < span:
            length = -slope / curvature
            step += length * direction
            h_step += length * h_direction
            break
        step += span * direction
        h_step += span * h_direction
        t_previous = t_next

    step = project_box(mu_k + step, lo, hi) - mu_k
    return step, model.hess(step)


def _max_feasible_step(
    point: npt.NDArray[np.float64],
    direction: npt.NDArray[np.float64],
    lo: npt.NDArray[np.float64],
    hi: npt.NDArray[np.float64],
) -> Tuple[float, int]:
    with np.errstate(divide="ignore", invalid="ignore"):
        limits = np.where(
            direction > 0,
            (hi - point) / direction,
            np.where(direction < 0, (lo - point) / direction, np.inf),
        )
    limits = np.maximum(limits, 0.0)
    blocking = int(np.argmin(limits))
    return float(limits[blocking]), blocking
