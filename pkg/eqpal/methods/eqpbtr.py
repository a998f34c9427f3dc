"""Trust-region models built on the fly from ROM and EQP approximations.

Every trust-region iteration solves the HDM primal and adjoint problem at the
center, builds a reduced basis that contains both solutions, trains EQP
weights to tolerances tied to the model criticality and the radius, and
returns a quadratic model of the hyperreduced augmented Lagrangian with
finite-difference Hessian-vector products.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt
import scipy.linalg

from eqpal.data.problem import ALContext, Problem
from eqpal.data.reduced import (
    ConstraintFamily,
    EqpTolerances,
    EqpWeights,
    ReducedBasis,
)
from eqpal.methods.auglag import SubproblemResult, SubsolverMethod
from eqpal.methods.elemental_system import HdmSolver, SolverError
from eqpal.methods.eqp import (
    EqpPreset,
    assemble_training_lp,
    audit_weights,
    build_training_set,
    hyper_f_and_gradient,
    resolve_selection,
    solve_hyper_primal,
    train_weights,
)
from eqpal.methods.rom import gram_schmidt, pod
from eqpal.methods.trust_region import ModelHandle, TrConfig, TrState, run

log = logging.getLogger(__name__)

HESSVEC_EPSILON = 1e-6
HESSVEC_MIN_NORM = 1e-14
HESSVEC_SHRINK = 10.0

LpSink = Callable[[Dict[str, Any]], None]


@dataclass(frozen=True)
class ToleranceSchedule:  # pylint: disable=too-many-instance-attributes
    """Constants of the EQP tolerance schedule.

    Args:
        kappa1 (float): weight of the rp tolerance
        kappa2 (float): weight of the lra tolerance
        kappa3 (float): weight of the lga tolerance
        kappa4 (float): weight of the c tolerance
        kappa5 (float): weight of the dcy tolerance
        kappa6 (float): weight of the dcmu tolerance
        kappa_hat (float): bound of the error indicator
        delta_dv (float): fixed domain volume tolerance
        delta_lq (float): fixed Lagrangian quantity tolerance
        delta_rs (float): fixed sensitivity residual tolerance
        delta_min (float): floor of the scheduled tolerances
    """

    kappa1: float = 1.0
    kappa2: float = 1.0
    kappa3: float = 1.0
    kappa4: float = 1.0
    kappa5: float = 1.0
    kappa6: float = 1.0
    kappa_hat: float = 1e-6
    delta_dv: float = 1e-6
    delta_lq: float = 1e-6
    delta_rs: float = 5e-4
    delta_min: float = 1e-14

    def __post_init__(self) -> None:
        """Validates the constants."""
        for kappa in self.kappas + (self.kappa_hat,):
            if not kappa > 0:
                raise ValueError(
                    f"schedule constants must be positive, got {kappa}."
                )
        fixed = (self.delta_dv, self.delta_lq, self.delta_rs, self.delta_min)
        for delta in fixed:
            if not delta >= 0:
                raise ValueError(
                    f"fixed tolerances must be nonnegative, got {delta}."
                )

    @property
    def kappas(self) -> Tuple[float, ...]:
        """kappa1 to kappa6."""
        return (
            self.kappa1,
            self.kappa2,
            self.kappa3,
            self.kappa4,
            self.kappa5,
            self.kappa6,
        )


@dataclass(frozen=True)
class EqpSettings:
    """Settings of the on-the-fly model construction.

    Args:
        preset (EqpPreset): constraint families used for training
        families (Optional[Tuple[ConstraintFamily, ...]]): explicit family
            selection, overrides the preset
        schedule (ToleranceSchedule): tolerance schedule
        pod_size (int): maximal number of POD modes per snapshot matrix
        hessvec_epsilon (float): finite-difference step
        audit (bool): re-check trained weights after every LP solve
    """

    preset: EqpPreset = EqpPreset.FULL
    families: Optional[Tuple[ConstraintFamily, ...]] = None
    schedule: ToleranceSchedule = field(default_factory=ToleranceSchedule)
    pod_size: int = 20
    hessvec_epsilon: float = HESSVEC_EPSILON
    audit: bool = True

    def __post_init__(self) -> None:
        """Validates the settings."""
        object.__setattr__(self, "preset", EqpPreset(self.preset))
        if self.families is not None:
            object.__setattr__(
                self,
                "families",
                tuple(ConstraintFamily(family) for family in self.families),
            )
        if self.pod_size < 0:
            raise ValueError(
                f"pod_size must be nonnegative, got {self.pod_size}."
            )
        if self.hessvec_epsilon <= 0:
            raise ValueError("hessvec_epsilon must be positive.")

    @property
    def selection(self) -> Union[EqpPreset, Tuple[ConstraintFamily, ...]]:
        """Explicit families if given, the preset otherwise."""
        return self.preset if self.families is None else self.families


@dataclass(frozen=True)
class SnapshotStore:
    """HDM primal and adjoint snapshots of the visited centers.

    Primal snapshots are stored as states, the deviations from the current
    offset are formed when a basis is built.

    Args:
        mus (Tuple[npt.NDArray[np.float64], ...]): snapshot parameters
        states (Tuple[npt.NDArray[np.float64], ...]): primal solutions
        adjoints (Tuple[npt.NDArray[np.float64], ...]): adjoint solutions
        pod_size (int): maximal number of POD modes per matrix
    """

    mus: Tuple[npt.NDArray[np.float64], ...] = ()
    states: Tuple[npt.NDArray[np.float64], ...] = ()
    adjoints: Tuple[npt.NDArray[np.float64], ...] = ()
    pod_size: int = 20

    @property
    def size(self) -> int:
        """Number of stored snapshot pairs."""
        return len(self.states)

    @property
    def pod_count(self) -> int:
        """Number of POD modes p_k = q_k = min(k, pod_size)."""
        return min(self.size, self.pod_size)

    def primal_deviations(
        self, offset: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        """Matrix of the primal snapshots minus the offset."""
        if self.size == 0:
            return np.zeros((offset.size, 0))
        return np.stack(self.states, axis=1) - offset[:, None]

    def adjoint_matrix(self, n_state: int) -> npt.NDArray[np.float64]:
        """Matrix of the adjoint snapshots."""
        if self.size == 0:
            return np.zeros((n_state, 0))
        return np.stack(self.adjoints, axis=1)

    def contains(self, mu: npt.NDArray[np.float64]) -> bool:
        """Whether a snapshot was taken at exactly mu."""
        return any(np.array_equal(mu, stored) for stored in self.mus)

    def inherit(self, count: int) -> SnapshotStore:
        """Store holding only the last count snapshots."""
        if count <= 0:
            return SnapshotStore(pod_size=self.pod_size)
        return SnapshotStore(
            mus=self.mus[-count:],
            states=self.states[-count:],
            adjoints=self.adjoints[-count:],
            pod_size=self.pod_size,
        )


def update_snapshots(
    store: SnapshotStore,
    *,
    u_star: npt.NDArray[np.float64],
    lambda_star: npt.NDArray[np.float64],
    mu: npt.NDArray[np.float64],
) -> SnapshotStore:
    """Store with the primal and adjoint solution at mu appended."""
    u_star = np.array(u_star, dtype=float)
    lambda_star = np.array(lambda_star, dtype=float)
    if not (np.all(np.isfinite(u_star)) and np.all(np.isfinite(lambda_star))):
        raise ValueError("snapshots must be finite.")
    return SnapshotStore(
        mus=store.mus + (np.array(mu, dtype=float),),
        states=store.states + (u_star,),
        adjoints=store.adjoints + (lambda_star,),
        pod_size=store.pod_size,
    )


def schedule_tolerances(
    schedule: ToleranceSchedule,
    chi_m_prev: float,
    delta_k: float,
    tau: float,
) -> EqpTolerances:
    """EQP tolerances that split the error indicator bound in six.

    Args:
        schedule (ToleranceSchedule): schedule constants
        chi_m_prev (float): lagged model criticality
        delta_k (float): lagged trust-region radius
        tau (float): penalty parameter

    Returns:
        tolerances with the fixed dv, lq and rs entries attached
    """
    if tau <= 0:
        raise ValueError(f"tolerance schedule needs tau > 0, got {tau}.")
    if delta_k <= 0:
        raise ValueError(
            f"trust-region radius must be positive, got {delta_k}."
        )
    bound = schedule.kappa_hat * min(chi_m_prev, delta_k)

    def share(kappa: float, scale: float = 1.0) -> float:
        return max(bound / (6.0 * kappa * scale), schedule.delta_min)

    return EqpTolerances(
        delta_dv=schedule.delta_dv,
        delta_rp=share(schedule.kappa1),
        delta_lra=share(schedule.kappa2),
        delta_lga=share(schedule.kappa3),
        delta_c=share(schedule.kappa4, tau),
        delta_dcy=share(schedule.kappa5, tau),
        delta_dcmu=share(schedule.kappa6, tau),
        delta_rs=schedule.delta_rs,
        delta_lq=schedule.delta_lq,
    )


def error_indicator(
    schedule: ToleranceSchedule, tolerances: EqpTolerances, tau: float
) -> float:
    """Weighted sum phi of the six scheduled tolerances."""
    kappa1, kappa2, kappa3, kappa4, kappa5, kappa6 = schedule.kappas
    return (
        kappa1 * tolerances.delta_rp
        + kappa2 * tolerances.delta_lra
        + kappa3 * tolerances.delta_lga
        + tau
        * (
            kappa4 * tolerances.delta_c
            + kappa5 * tolerances.delta_dcy
            + kappa6 * tolerances.delta_dcmu
        )
    )


class SolveCounter:
    """Counts of reduced and hyperreduced model solves."""

    def __init__(self) -> None:
        """Create a counter with all counts at zero."""
        self.counts: Dict[str, int] = {"rom": 0, "eqp": 0}

    def record(self, kind: str, n: int = 1) -> None:
        """Count n solves of the given kind."""
        self.counts[kind] += n


class ModelCore(ABC):
    """Function whose gradient is differenced for Hessian-vector products.

    Attributes:
        center (npt.NDArray[np.float64]): expansion point
        gradient (npt.NDArray[np.float64]): gradient at the center
    """

    center: npt.NDArray[np.float64]
    gradient: npt.NDArray[np.float64]

    @abstractmethod
    def value_gradient(
        self, mu: npt.NDArray[np.float64]
    ) -> Tuple[float, npt.NDArray[np.float64]]:
        """Value and gradient at mu."""


class HdmModelCore(ModelCore):
    """Exact reduced augmented Lagrangian of the HDM."""

    def __init__(
        self,
        hdm: HdmSolver,
        ctx: ALContext,
        center: npt.NDArray[np.float64],
        gradient: npt.NDArray[np.float64],
    ):
        """Create the core at a center with known gradient."""
        self.hdm = hdm
        self.ctx = ctx
        self.center = np.asarray(center, dtype=float)
        self.gradient = np.asarray(gradient, dtype=float)

    def value_gradient(
        self, mu: npt.NDArray[np.float64]
    ) -> Tuple[float, npt.NDArray[np.float64]]:
        """HDM value and adjoint gradient."""
        return self.hdm.value_gradient(mu, self.ctx)


class HyperModelCore(ModelCore):  # pylint: disable=too-many-instance-attributes
    """Hyperreduced augmented Lagrangian for fixed basis and weights."""

    def __init__(  # pylint: disable=too-many-arguments
        self,
        *,
        problem: Problem,
        basis: ReducedBasis,
        weights: EqpWeights,
        ctx: ALContext,
        center: npt.NDArray[np.float64],
        counter: SolveCounter,
        kind: str,
    ):
        """Create the core and evaluate it at the center."""
        self.problem = problem
        self.basis = basis
        self.weights = weights
        self.ctx = ctx
        self.counter = counter
        self.kind = kind
        self.center = np.array(center, dtype=float)
        self.y_center = solve_hyper_primal(
            problem=problem, basis=basis, weights=weights, mu=self.center
        )
        self.value, self.gradient = self.value_gradient(self.center)

    def value_gradient(
        self, mu: npt.NDArray[np.float64]
    ) -> Tuple[float, npt.NDArray[np.float64]]:
        """Hyperreduced value and gradient, warm started at the center."""
        self.counter.record(self.kind)
        return hyper_f_and_gradient(
            problem=self.problem,
            basis=self.basis,
            weights=self.weights,
            mu=mu,
            ctx=self.ctx,
            y_guess=self.y_center,
        )


def hessvec(
    model_core: ModelCore,
    v: npt.NDArray[np.float64],
    epsilon: float = HESSVEC_EPSILON,
) -> npt.NDArray[np.float64]:
    """Forward-difference Hessian-vector product of the core function.

    The direction is normalized before differencing and the result scaled
    back. If the solve at the perturbed point fails, the step is shrunk by
    10 once.

    Args:
        model_core (ModelCore): function with cached gradient at the center
        v (npt.NDArray[np.float64]): direction
        epsilon (float): finite-difference step

    Returns:
        approximation of H v
    """
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm < HESSVEC_MIN_NORM:
        raise ValueError(
            f"Hessian-vector product needs a nonzero direction, got norm "
            f"{norm:.3e}."
        )
    direction = v / norm
    step = epsilon
    try:
        _, gradient = model_core.value_gradient(
            model_core.center + step * direction
        )
    except (SolverError, scipy.linalg.LinAlgError) as error:
        step = epsilon / HESSVEC_SHRINK
        log.warning(
            f"solve for the Hessian-vector product failed ({error}), "
            f"retrying with step {step:.1e}."
        )
        _, gradient = model_core.value_gradient(
            model_core.center + step * direction
        )
    return (gradient - model_core.gradient) * (norm / step)


def build_basis(
    *,
    u_star: npt.NDArray[np.float64],
    lambda_star: npt.NDArray[np.float64],
    sensitivity0: npt.NDArray[np.float64],
    store: SnapshotStore,
) -> ReducedBasis:
    """Orthonormal basis of [lambda*, du*/dmu(mu_0), POD(U), POD(V)].

    The basis is affine with offset u*(mu_k), so that both the primal and
    the adjoint solution at the center lie in its range.

    Args:
        u_star (npt.NDArray[np.float64]): primal solution at the center
        lambda_star (npt.NDArray[np.float64]): adjoint solution at the center
        sensitivity0 (npt.NDArray[np.float64]): HDM sensitivity at the start
            point of the major iteration
        store (SnapshotStore): snapshots of earlier centers

    Returns:
        reduced basis with provenance tags
    """
    columns: List[npt.NDArray[np.float64]] = [lambda_star]
    tags = ["adjoint"]
    for index in range(sensitivity0.shape[1]):
        columns.append(sensitivity0[:, index])
        tags.append(f"sensitivity-{index}")

    count = store.pod_count
    if count > 0:
        primal_modes = pod(store.primal_deviations(u_star), count)
        adjoint_modes = pod(store.adjoint_matrix(u_star.size), count)
        columns.extend(primal_modes.T)
        tags.extend(["pod-primal"] * primal_modes.shape[1])
        columns.extend(adjoint_modes.T)
        tags.extend(["pod-adjoint"] * adjoint_modes.shape[1])
    return gram_schmidt(columns, tags=tags, offset=u_star)


def build_model(  # pylint: disable=too-many-locals,too-many-arguments
    *,
    problem: Problem,
    hdm: HdmSolver,
    mu_k: npt.NDArray[np.float64],
    sensitivity0: Optional[npt.NDArray[np.float64]],
    store: SnapshotStore,
    ctx: ALContext,
    delta_k: float,
    chi_m_prev: float,
    settings: EqpSettings,
    method: SubsolverMethod,
    counter: SolveCounter,
    lp_sink: Optional[LpSink] = None,
) -> Tuple[ModelHandle, SnapshotStore]:
    """Build the trust-region model at the center mu_k.

    Args:
        problem (Problem): full system
        hdm (HdmSolver): HDM solver of the run
        mu_k (npt.NDArray[np.float64]): trust-region center
        sensitivity0 (Optional[npt.NDArray[np.float64]]): HDM sensitivity at
            the start of the major iteration, unused for the HDM method
        store (SnapshotStore): snapshots of earlier centers
        ctx (ALContext): multiplier estimate and penalty
        delta_k (float): lagged trust-region radius
        chi_m_prev (float): lagged model criticality
        settings (EqpSettings): model construction settings
        method (SubsolverMethod): model type
        counter (SolveCounter): reduced solve counter
        lp_sink (Optional[LpSink]): receiver of every trained LP

    Returns:
        Tuple of the model and the updated snapshot store
    """
    mu_k = np.array(mu_k, dtype=float)
    f_true, g_true = hdm.value_gradient(mu_k, ctx)
    epsilon = settings.hessvec_epsilon

    if method == SubsolverMethod.HDM:
        core = HdmModelCore(hdm, ctx, mu_k, g_true)
        handle = ModelHandle(
            center=mu_k,
            value=f_true,
            gradient=g_true,
            hessvec=lambda v: hessvec(core, v, epsilon),
            true_gradient=g_true,
        )
        return handle, store

    if sensitivity0 is None:
        raise ValueError("reduced models need the HDM sensitivity.")
    u_star = hdm.primal(mu_k)
    lambda_star = hdm.adjoint(mu_k, ctx)
    basis = build_basis(
        u_star=u_star,
        lambda_star=lambda_star,
        sensitivity0=sensitivity0,
        store=store,
    )
    tolerances = schedule_tolerances(
        settings.schedule, chi_m_prev, delta_k, ctx.tau
    )
    details: Dict[str, Any] = {
        f"delta_{name}": value for name, value in tolerances.as_dict().items()
    }

    weights = EqpWeights.ones(problem.n_elements)
    kind = "rom"
    indicator = 0.0
    if method == SubsolverMethod.EQP:
        weights, audit_passed = _train(
            problem=problem,
            basis=basis,
            mu_k=mu_k,
            ctx=ctx,
            tolerances=tolerances,
            settings=settings,
            counter=counter,
            lp_sink=lp_sink,
        )
        details["audit_passed"] = audit_passed
        kind = "eqp"
        indicator = error_indicator(settings.schedule, tolerances, ctx.tau)

    try:
        core = HyperModelCore(
            problem=problem,
            basis=basis,
            weights=weights,
            ctx=ctx,
            center=mu_k,
            counter=counter,
            kind=kind,
        )
    except (SolverError, scipy.linalg.LinAlgError) as error:
        if method != SubsolverMethod.EQP:
            raise
        log.warning(
            f"hyperreduced solve failed ({error}), falling back to unit "
            "weights."
        )
        weights = EqpWeights.ones(problem.n_elements)
        kind = "rom"
        core = HyperModelCore(
            problem=problem,
            basis=basis,
            weights=weights,
            ctx=ctx,
            center=mu_k,
            counter=counter,
            kind=kind,
        )

    if not store.contains(mu_k):
        store = update_snapshots(
            store, u_star=u_star, lambda_star=lambda_star, mu=mu_k
        )
    details["n_active"] = int(weights.active_set.size)
    handle = ModelHandle(
        center=mu_k,
        value=core.value,
        gradient=core.gradient,
        hessvec=lambda v: hessvec(core, v, epsilon),
        error_indicator=indicator,
        true_gradient=g_true,
        basis_size=basis.size,
        usage_fraction=weights.usage_fraction,
        details=details,
    )
    return handle, store


class TrustRegionSubsolver:  # pylint: disable=too-many-instance-attributes
    """Solves AL subproblems with the trust-region method.

    The instance belongs to one optimization run. It keeps the HDM solver
    with its cache and counters, the reduced solve counter and the snapshot
    store that may be inherited between major iterations.
    """

    def __init__(  # pylint: disable=too-many-arguments
        self,
        problem: Problem,
        *,
        method: SubsolverMethod,
        tr_config: TrConfig,
        settings: EqpSettings,
        inherit_snapshots: int = 0,
        hdm: Optional[HdmSolver] = None,
        lp_sink: Optional[LpSink] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        """Create a subsolver.

        Args:
            problem (Problem): full system
            method (SubsolverMethod): model type
            tr_config (TrConfig): trust-region parameters
            settings (EqpSettings): model construction settings
            inherit_snapshots (int): snapshots carried into the next major
            hdm (Optional[HdmSolver]): HDM solver, a new one if None
            lp_sink (Optional[LpSink]): receiver of every trained LP
            rng (Optional[np.random.Generator]): power iteration source
        """
        self.problem = problem
        self.method = SubsolverMethod(method)
        self.tr_config = tr_config
        self.settings = settings
        self.inherit_snapshots = inherit_snapshots
        self.hdm = HdmSolver(problem) if hdm is None else hdm
        self.lp_sink = lp_sink
        self.rng = rng
        self.counter = SolveCounter()
        self.store = SnapshotStore(pod_size=settings.pod_size)
        self.major = 0

    @property
    def counts(self) -> Dict[str, int]:
        """Cumulative solve counts of the run."""
        return {
            "hdm": self.hdm.n_solves,
            "hdm_sensitivity": self.hdm.counts["sensitivity"],
            "rom": self.counter.counts["rom"],
            "eqp": self.counter.counts["eqp"],
        }

    def __call__(
        self, mu0: npt.NDArray[np.float64], ctx: ALContext, omega: float
    ) -> SubproblemResult:
        """Solve the AL subproblem for fixed (theta, tau) to tolerance omega."""
        mu0 = np.array(mu0, dtype=float)
        store = self.store.inherit(self.inherit_snapshots)
        sensitivity0 = None
        if self.method != SubsolverMethod.HDM:
            sensitivity0 = self.hdm.sensitivity(mu0)
        major = self.major
        sink = None
        if self.lp_sink is not None:
            sink = self._tagged_sink(major)

        def model_builder(state: TrState) -> ModelHandle:
            nonlocal store
            chi_prev, delta_prev = state.schedule_inputs()
            handle, store = build_model(
                problem=self.problem,
                hdm=self.hdm,
                mu_k=state.center,
                sensitivity0=sensitivity0,
                store=store,
                ctx=ctx,
                delta_k=delta_prev,
                chi_m_prev=chi_prev,
                settings=self.settings,
                method=self.method,
                counter=self.counter,
                lp_sink=sink,
            )
            return handle

        outcome = run(
            mu0=mu0,
            model_builder=model_builder,
            objective=lambda mu: self.hdm.value(mu, ctx),
            config=self.tr_config,
            omega=omega,
            lower=self.problem.param_lower,
            upper=self.problem.param_upper,
            rng=self.rng,
        )
        self.store = store
        self.major += 1

        functionals = self.hdm.functionals(outcome.mu)
        trace = tuple(
            {"major": major, **record.as_dict()} for record in outcome.records
        )
        return SubproblemResult(
            mu=outcome.mu,
            objective=functionals.objective,
            constraints=functionals.constraints,
            chi=outcome.chi,
            iterations=outcome.iterations,
            converged=outcome.converged,
            trace=trace,
            counts=self.counts,
        )

    def _tagged_sink(self, major: int) -> LpSink:
        sink = self.lp_sink
        assert sink is not None
        counter = {"lp": 0}

        def tagged(payload: Dict[str, Any]) -> None:
            sink({"major": major, "index": counter["lp"], **payload})
            counter["lp"] += 1

        return tagged


def _train(  # pylint: disable=too-many-arguments
    *,
    problem: Problem,
    basis: ReducedBasis,
    mu_k: npt.NDArray[np.float64],
    ctx: ALContext,
    tolerances: EqpTolerances,
    settings: EqpSettings,
    counter: SolveCounter,
    lp_sink: Optional[LpSink],
) -> Tuple[EqpWeights, Optional[bool]]:
    training_set = build_training_set(
        problem=problem, basis=basis, mus=[mu_k], ctx=ctx
    )
    counter.record("rom")
    training_lp = assemble_training_lp(
        problem=problem,
        basis=basis,
        training_set=training_set,
        tolerances=tolerances,
        ctx=ctx,
        constraint_selection=settings.selection,
    )
    weights = train_weights(training_lp)
    if lp_sink is not None:
        lp_sink(
            {
                "mu": mu_k.tolist(),
                "tolerances": tolerances.as_dict(),
                "row_families": [
                    family.value for family in training_lp.row_families
                ],
                "c": training_lp.instance.c.tolist(),
                "A": training_lp.instance.A.tolist(),
                "b": training_lp.instance.b.tolist(),
                "weights": weights.rho.tolist(),
            }
        )

    if not settings.audit:
        return weights, None
    audit = audit_weights(
        problem=problem,
        basis=basis,
        training_set=training_set,
        weights=weights,
        tolerances=tolerances,
        ctx=ctx,
        families=resolve_selection(settings.selection, ctx.tau),
    )
    if not audit.passed:
        log.warning(
            "trained EQP weights violate the accuracy constraints: "
            + ", ".join(
                f"{family.value} {audit.residuals[family]:.3e} > "
                f"{audit.limits[family]:.3e}"
                for family in audit.residuals
                if audit.residuals[family] > audit.limits[family]
            )
        )
    return weights, audit.passed
