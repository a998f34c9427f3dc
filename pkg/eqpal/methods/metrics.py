"""Convergence metrics and cutoff costs of optimization histories."""
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from eqpal.methods.auglag import MajorRecord

HISTORY_COLUMNS = (
    "iteration",
    "j",
    "c_inf",
    "chi_inf",
    "S",
    "usage_min",
    "usage_max",
    "n_hdm",
    "n_rom",
    "n_eqp",
)
TIMING_COLUMNS = ("iteration", "wall_time", "cumulative_wall_time")
DEFAULT_CUTOFFS: Tuple[Tuple[float, float], ...] = (
    (1e-3, 1e-4),
    (1e-4, 1e-5),
    (1e-6, 1e-6),
)


def compute_si(j_i: float, j_star: float, j_initial: float) -> float:
    """Normalized distance |j_i - j*| / j_initial from the optimal objective.

    Args:
        j_i (float): objective of the iterate
        j_star (float): reference optimal objective
        j_initial (float): objective at the start point

    Returns:
        suboptimality S_i
    """
    if j_initial == 0:
        raise ValueError("S_i is undefined for a vanishing initial objective.")
    return abs(j_i - j_star) / j_initial


def compute_history(
    *,
    records: Sequence[MajorRecord],
    j_star: float,
    j_initial: float,
) -> pd.DataFrame:
    """One row per major iteration with objective, residuals and costs.

    Element usage is given in percent, minimal and maximal over the
    trust-region iterations of the major iteration. Solve counts are
    cumulative.

    Args:
        records (Sequence[MajorRecord]): major iterations of a run
        j_star (float): reference optimal objective
        j_initial (float): objective at the start point

    Returns:
        DataFrame with the columns of :data:`HISTORY_COLUMNS`
    """
    rows = []
    for record in records:
        usage = [entry["usage_fraction"] for entry in record.trace]
        rows.append(
            {
                "iteration": record.iteration,
                "j": record.objective,
                "c_inf": record.c_inf,
                "chi_inf": record.chi_inf,
                "S": compute_si(record.objective, j_star, j_initial),
                "usage_min": 100.0 * min(usage) if usage else np.nan,
                "usage_max": 100.0 * max(usage) if usage else np.nan,
                "n_hdm": record.counts.get("hdm", 0),
                "n_rom": record.counts.get("rom", 0),
                "n_eqp": record.counts.get("eqp", 0),
            }
        )
    return pd.DataFrame(rows, columns=list(HISTORY_COLUMNS))


def compute_timings(records: Sequence[MajorRecord]) -> pd.DataFrame:
    """Wall time per major iteration and its running sum."""
    timings = pd.DataFrame(
        {
            "iteration": [record.iteration for record in records],
            "wall_time": [record.wall_time for record in records],
        }
    )
    timings["cumulative_wall_time"] = timings["wall_time"].cumsum()
    return timings[list(TIMING_COLUMNS)]


def cutoff_iteration(
    history: pd.DataFrame, epsilon: float, constraint_tolerance: float
) -> Optional[int]:
    """Row of the first major with S < epsilon and |c|_inf <= tolerance.

    Returns:
        row position in the history, None if the cutoff is never reached
    """
    reached = (history["S"] < epsilon) & (
        history["c_inf"] <= constraint_tolerance
    )
    if not reached.any():
        return None
    return int(np.flatnonzero(reached.to_numpy())[0])


def compute_cutoff_costs(
    *,
    history: pd.DataFrame,
    timings: pd.DataFrame,
    cutoffs: Sequence[Tuple[float, float]] = DEFAULT_CUTOFFS,
) -> pd.DataFrame:
    """Solve counts and wall time needed to reach each cutoff.

    Args:
        history (pd.DataFrame): history of a run (see
            :func:`compute_history`)
        timings (pd.DataFrame): timings of the same run (see
            :func:`compute_timings`)
        cutoffs (Sequence[Tuple[float, float]]): pairs of suboptimality and
            constraint tolerance

    Returns:
        DataFrame with the columns 'epsilon', 'constraint_tolerance',
        'reached', 'major', 'n_hdm', 'n_rom', 'n_eqp' and 'cost', unreached
        cutoffs hold NaN
    """
    rows = []
    for epsilon, constraint_tolerance in cutoffs:
        row = cutoff_iteration(history, epsilon, constraint_tolerance)
        if row is None:
            rows.append(
                {
                    "epsilon": epsilon,
                    "constraint_tolerance": constraint_tolerance,
                    "reached": False,
                    "major": np.nan,
                    "n_hdm": np.nan,
                    "n_rom": np.nan,
                    "n_eqp": np.nan,
                    "cost": np.nan,
                }
            )
            continue
        rows.append(
            {
                "epsilon": epsilon,
                "constraint_tolerance": constraint_tolerance,
                "reached": True,
                "major": history["iteration"].iloc[row],
                "n_hdm": history["n_hdm"].iloc[row],
                "n_rom": history["n_rom"].iloc[row],
                "n_eqp": history["n_eqp"].iloc[row],
                "cost": timings["cumulative_wall_time"].iloc[row],
            }
        )
    return pd.DataFrame(rows)
