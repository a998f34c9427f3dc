"""Optimization runs, reference objectives, comparisons and studies."""

from __future__ import annotations

import dataclasses
import logging
import pathlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
import scipy.linalg
from aenum import Enum

from eqpal.methods.auglag import (
    AuglagConfig,
    MajorRecord,
    SubsolverMethod,
    run_auglag,
)
from eqpal.methods.burgers_testbed import BurgersConfig, prepare
from eqpal.methods.elemental_system import HdmSolver, SolverError
from eqpal.methods.eqpbtr import EqpSettings, LpSink, TrustRegionSubsolver
from eqpal.methods.metrics import (
    DEFAULT_CUTOFFS,
    compute_cutoff_costs,
    compute_history,
    compute_timings,
)
from eqpal.methods.trust_region import TrConfig

log = logging.getLogger(__name__)

PENALTY_STUDY_TAU0 = (10.0, 25.0, 50.0)
PENALTY_STUDY_SCALE = (10.0, 50.0, 100.0)
SNAPSHOT_STUDY_COUNTS = (0, 5, 15, 20)


class StudyKind(Enum):  # pylint: disable=too-few-public-methods
    """Parameter studies of the optimization framework."""

    _init_ = "value __doc__"
    PENALTY = "penalty", "grid over the initial penalty and its growth factor"
    SNAPSHOTS = "snapshots", "snapshots inherited between major iterations"


@dataclass(frozen=True)
class ReferenceSettings:
    """Source of the reference objective j* used for S_i.

    Args:
        objective (Optional[float]): known reference objective
        compute (bool): compute j* with a tightly converged HDM run
        omega_star (float): optimality tolerance of the reference run
        pi_star (float): feasibility tolerance of the reference run
    """

    objective: Optional[float] = None
    compute: bool = False
    omega_star: float = 1e-10
    pi_star: float = 1e-10

    def __post_init__(self) -> None:
        """Validates the tolerances."""
        if self.omega_star <= 0 or self.pi_star <= 0:
            raise ValueError("reference tolerances must be positive.")


@dataclass(frozen=True)
class RunConfig:  # pylint: disable=too-many-instance-attributes
    """Complete description of one optimization run.

    Args:
        method (Optional[SubsolverMethod]): subproblem model, overrides the
            method of the auglag section if given
        seed (int): seed of the random power iteration start vectors
        label (Optional[str]): name of the run, defaults to the method
        output_directory (pathlib.Path): directory of the run reports
        testbed (BurgersConfig): test problem
        auglag (AuglagConfig): augmented Lagrangian parameters
        trustregion (TrConfig): trust-region parameters
        eqp (EqpSettings): model construction settings
        reference (ReferenceSettings): reference objective source
    """

    method: Optional[SubsolverMethod] = None
    seed: int = 0
    label: Optional[str] = None
    output_directory: pathlib.Path = pathlib.Path("results")
    testbed: BurgersConfig = field(default_factory=BurgersConfig)
    auglag: AuglagConfig = field(default_factory=AuglagConfig)
    trustregion: TrConfig = field(default_factory=TrConfig)
    eqp: EqpSettings = field(default_factory=EqpSettings)
    reference: ReferenceSettings = field(default_factory=ReferenceSettings)

    def __post_init__(self) -> None:
        """Synchronizes the method and fills the defaults."""
        if self.method is None:
            object.__setattr__(self, "method", self.auglag.method)
        method = SubsolverMethod(self.method)
        object.__setattr__(self, "method", method)
        if self.auglag.method != method:
            object.__setattr__(
                self, "auglag", dataclasses.replace(self.auglag, method=method)
            )
        if self.label is None:
            object.__setattr__(self, "label", method.value)
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}.")
        if self.trustregion.kappa_hat != self.eqp.schedule.kappa_hat:
            raise ValueError(
                "kappa_hat of the trust region and of the tolerance schedule "
                f"differ: {self.trustregion.kappa_hat} != "
                f"{self.eqp.schedule.kappa_hat}."
            )
        object.__setattr__(
            self, "output_directory", pathlib.Path(self.output_directory)
        )


@dataclass(frozen=True)
class RunResult:  # pylint: disable=too-many-instance-attributes
    """Outcome of :func:`run_optimization`.

    Attributes:
        config (RunConfig): configuration of the run
        records (Tuple[MajorRecord, ...]): finished major iterations
        converged (bool): both final tolerances met
        failure (Optional[str]): solver error that aborted the run
        mu (npt.NDArray[np.float64]): last parameter vector
        j_initial (float): objective at the start point
        j_reference (float): reference objective used for S_i
        wall_time (float): seconds spent in the optimization
        counts (Dict[str, int]): total solve counts
        history (pd.DataFrame): one row per major iteration
        timings (pd.DataFrame): wall time per major iteration
    """

    config: RunConfig
    records: Tuple[MajorRecord, ...]
    converged: bool
    failure: Optional[str]
    mu: npt.NDArray[np.float64]
    j_initial: float
    j_reference: float
    wall_time: float
    counts: Dict[str, int]
    history: pd.DataFrame = field(repr=False)
    timings: pd.DataFrame = field(repr=False)

    @property
    def label(self) -> str:
        """Name of the run."""
        return str(self.config.label)

    @property
    def trace(self) -> List[Dict[str, Any]]:
        """Trust-region iterations of all major iterations."""
        return [entry for record in self.records for entry in record.trace]

    @property
    def objective(self) -> float:
        """Objective of the last major iteration, NaN without majors."""
        return self.records[-1].objective if self.records else np.nan

    def summary(self) -> Dict[str, Any]:
        """Plain mapping of the final state for the run summary."""
        last = self.records[-1] if self.records else None
        return {
            "label": self.label,
            "method": self.config.method.value,
            "seed": self.config.seed,
            "converged": self.converged,
            "failure": self.failure,
            "mu": self.mu.tolist(),
            "objective": self.objective,
            "c_inf": last.c_inf if last else np.nan,
            "c_norm": last.c_norm if last else np.nan,
            "chi_inf": last.chi_inf if last else np.nan,
            "majors": len(self.records),
            "tr_iterations": sum(
                record.subproblem_iterations for record in self.records
            ),
            "j_initial": self.j_initial,
            "j_reference": self.j_reference,
            "counts": dict(self.counts),
            "wall_time": self.wall_time,
        }


def start_point(
    lower: npt.NDArray[np.float64], upper: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """Zero parameter vector projected into the box."""
    return np.clip(np.zeros(lower.size), lower, upper)


def run_optimization(
    run_config: RunConfig, *, lp_sink: Optional[LpSink] = None
) -> RunResult:
    """Run the augmented Lagrangian trust-region optimization.

    Solver failures do not raise, the finished major iterations are returned
    together with the failure message.

    Args:
        run_config (RunConfig): run description
        lp_sink (Optional[LpSink]): receiver of every trained LP

    Returns:
        result with history and timings
    """
    _, problem = prepare(run_config.testbed)
    mu0 = start_point(problem.param_lower, problem.param_upper)
    hdm = HdmSolver(problem)
    subsolver = TrustRegionSubsolver(
        problem,
        method=run_config.method,
        tr_config=run_config.trustregion,
        settings=run_config.eqp,
        inherit_snapshots=run_config.auglag.inherit_snapshots,
        hdm=hdm,
        lp_sink=lp_sink,
        rng=np.random.default_rng(run_config.seed),
    )

    records: List[MajorRecord] = []
    failure = None
    converged = False
    j_initial = np.nan
    start = time.perf_counter()
    try:
        j_initial = hdm.functionals(mu0).objective
        outcome = run_auglag(
            problem=problem,
            config=run_config.auglag,
            subsolver=subsolver,
            mu0=mu0,
            callback=records.append,
        )
        converged = outcome.converged
    except (SolverError, scipy.linalg.LinAlgError) as error:
        failure = f"{type(error).__name__}: {error}"
        log.error(
            f"run {run_config.label} aborted after {len(records)} major "
            f"iterations: {failure}"
        )
    wall_time = time.perf_counter() - start

    j_reference = _reference_objective(run_config, records)
    log.info(
        f"run {run_config.label} finished in {wall_time:.2f} s "
        f"(converged: {converged})."
    )
    return RunResult(
        config=run_config,
        records=tuple(records),
        converged=converged,
        failure=failure,
        mu=records[-1].mu if records else mu0,
        j_initial=j_initial,
        j_reference=j_reference,
        wall_time=wall_time,
        counts=subsolver.counts,
        history=compute_history(
            records=records, j_star=j_reference, j_initial=j_initial
        ),
        timings=compute_timings(records),
    )


def compute_reference_objective(run_config: RunConfig) -> float:
    """Objective of a tightly converged HDM run of the same problem.

    Args:
        run_config (RunConfig): run whose problem is solved

    Returns:
        reference objective j*
    """
    settings = run_config.reference
    reference_config = dataclasses.replace(
        run_config,
        method=SubsolverMethod.HDM,
        label=f"{run_config.label}-reference",
        auglag=dataclasses.replace(
            run_config.auglag,
            method=SubsolverMethod.HDM,
            omega_star=settings.omega_star,
            pi_star=settings.pi_star,
        ),
        reference=ReferenceSettings(),
    )
    result = run_optimization(reference_config)
    if result.failure is not None:
        raise SolverError(
            f"reference run failed: {result.failure}",
            residual_norm=np.nan,
            iterations=len(result.records),
        )
    if not result.converged:
        log.warning(
            "reference run did not meet its tolerances, using its last "
            "objective."
        )
    return result.objective


def with_reference(result: RunResult, j_star: float) -> RunResult:
    """Result whose history is measured against another reference."""
    return dataclasses.replace(
        result,
        j_reference=j_star,
        history=compute_history(
            records=result.records, j_star=j_star, j_initial=result.j_initial
        ),
    )


def unique_labels(labels: Sequence[str]) -> List[str]:
    """Labels with a numeric suffix appended to repeated ones."""
    seen: Dict[str, int] = {}
    unique = []
    for label in labels:
        count = seen.get(label, 0)
        seen[label] = count + 1
        unique.append(label if count == 0 else f"{label}-{count + 1}")
    return unique


def comparison_table(
    results: Sequence[RunResult],
    *,
    j_star: Optional[float] = None,
    cutoffs: Sequence[Tuple[float, float]] = DEFAULT_CUTOFFS,
) -> pd.DataFrame:
    """Solve counts, costs and speedups of runs at common cutoffs.

    All runs are measured against one reference objective. The baseline is
    the first HDM run, or the first run if none used the HDM. Speedup is the
    baseline cost divided by the cost of the run at the same cutoff.

    Args:
        results (Sequence[RunResult]): runs to compare, at least two
        j_star (Optional[float]): reference objective, the smallest final
            objective of the runs if None
        cutoffs (Sequence[Tuple[float, float]]): pairs of suboptimality and
            constraint tolerance

    Returns:
        DataFrame with one row per run and cutoff
    """
    if len(results) < 2:
        raise ValueError(
            f"a comparison needs at least two runs, got {len(results)}."
        )
    if j_star is None:
        finals = [result.objective for result in results if result.records]
        if not finals:
            raise ValueError("none of the compared runs finished a major.")
        j_star = float(np.nanmin(finals))
    baseline_index = next(
        (
            index
            for index, result in enumerate(results)
            if result.config.method == SubsolverMethod.HDM
        ),
        0,
    )

    tables = []
    for result in results:
        measured = with_reference(result, j_star)
        tables.append(
            compute_cutoff_costs(
                history=measured.history,
                timings=measured.timings,
                cutoffs=cutoffs,
            )
        )
    baseline = tables[baseline_index]

    labels = unique_labels([result.label for result in results])
    rows = []
    for label, result, table in zip(labels, results, tables):
        frame = table.copy()
        frame.insert(0, "method", result.config.method.value)
        frame.insert(0, "label", label)
        frame["speedup"] = baseline["cost"].to_numpy() / frame["cost"]
        frame["hdm_solve_ratio"] = (
            baseline["n_hdm"].to_numpy() / frame["n_hdm"]
        )
        rows.append(frame)
    return pd.concat(rows, ignore_index=True)


def study_configs(kind: StudyKind, base: RunConfig) -> List[RunConfig]:
    """Run configurations of a parameter study.

    The penalty study covers the grid tau0 in (10, 25, 50) times a in
    (10, 50, 100), the snapshot study inherits 0, 5, 15 and 20 snapshots.
    Every run writes to its own subdirectory of the base output directory.
    """
    kind = StudyKind(kind)
    configs = []
    if kind == StudyKind.PENALTY:
        for tau0 in PENALTY_STUDY_TAU0:
            for scale_a in PENALTY_STUDY_SCALE:
                label = f"tau0={tau0:g}_a={scale_a:g}"
                auglag = dataclasses.replace(
                    base.auglag, tau0=tau0, scale_a=scale_a
                )
                configs.append(_study_config(base, label, auglag))
    else:
        for count in SNAPSHOT_STUDY_COUNTS:
            label = f"snapshots={count}"
            auglag = dataclasses.replace(base.auglag, inherit_snapshots=count)
            configs.append(_study_config(base, label, auglag))
    return configs


def run_study(
    kind: StudyKind, base: RunConfig, *, workers: int = 1
) -> Tuple[List[RunResult], pd.DataFrame]:
    """Run a parameter study and rank its configurations.

    Args:
        kind (StudyKind): study to run
        base (RunConfig): configuration the study varies
        workers (int): number of worker processes

    Returns:
        Tuple of the run results and the ranked study table
    """
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}.")
    configs = study_configs(kind, base)
    if workers == 1:
        results = [run_optimization(config) for config in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run_optimization, configs))
    return results, study_table(results)


def study_table(results: Sequence[RunResult]) -> pd.DataFrame:
    """One row per study run, ranked by majors needed to become feasible.

    Runs that never reach the final feasibility tolerance rank last.
    """
    rows = []
    for result in results:
        summary = result.summary()
        rows.append(
            {
                "label": result.label,
                "tau0": result.config.auglag.tau0,
                "scale_a": result.config.auglag.scale_a,
                "inherit_snapshots": result.config.auglag.inherit_snapshots,
                "converged": result.converged,
                "failure": result.failure,
                "majors": summary["majors"],
                "majors_to_feasibility": majors_to_feasibility(
                    result.records, result.config.auglag.pi_star
                ),
                "objective": summary["objective"],
                "c_inf": summary["c_inf"],
                "chi_inf": summary["chi_inf"],
                "n_hdm": result.counts.get("hdm", 0),
                "n_rom": result.counts.get("rom", 0),
                "n_eqp": result.counts.get("eqp", 0),
                "wall_time": result.wall_time,
            }
        )
    table = pd.DataFrame(rows)
    table = table.sort_values(
        ["majors_to_feasibility", "label"], na_position="last", kind="stable"
    ).reset_index(drop=True)
    table.insert(0, "rank", np.arange(1, len(table) + 1))
    return table


def majors_to_feasibility(
    records: Sequence[MajorRecord], pi_star: float
) -> float:
    """Number of majors until |c|_2 <= pi_star, NaN if never reached."""
    for record in records:
        if record.c_norm <= pi_star:
            return float(record.iteration + 1)
    return np.nan


def _study_config(
    base: RunConfig, label: str, auglag: AuglagConfig
) -> RunConfig:
    return dataclasses.replace(
        base,
        label=label,
        auglag=auglag,
        output_directory=base.output_directory / label,
    )


def _reference_objective(
    run_config: RunConfig, records: Sequence[MajorRecord]
) -> float:
    settings = run_config.reference
    if settings.objective is not None:
        return settings.objective
    if settings.compute:
        return compute_reference_objective(run_config)
    return records[-1].objective if records else np.nan
