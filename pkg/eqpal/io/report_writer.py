"""Write run reports, comparison tables, study tables and LP dumps."""

import json
import logging
import pathlib
from typing import Any, Dict, Iterable

import numpy as np
import pandas as pd

from eqpal.methods.experiment import RunResult

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
UNREACHED = "unreached"

HISTORY_FILE = "history.csv"
TIMINGS_FILE = "timings.csv"
TRACE_FILE = "trace.jsonl"
SUMMARY_FILE = "summary.json"
COMPARISON_FILE = "comparison.csv"
STUDY_FILE = "study.csv"


def write_run(*, result: RunResult, output_directory: pathlib.Path) -> None:
    """Write history, timings, trace and summary of a run.

    Args:
        result (RunResult): run to report
        output_directory (pathlib.Path): target directory, created if missing
    """
    output_directory.mkdir(parents=True, exist_ok=True)
    write_table(
        table=result.history, output_file=output_directory / HISTORY_FILE
    )
    write_table(
        table=result.timings, output_file=output_directory / TIMINGS_FILE
    )
    write_json_lines(
        entries=result.trace, output_file=output_directory / TRACE_FILE
    )
    write_json(
        content=result.summary(), output_file=output_directory / SUMMARY_FILE
    )
    log.info(f"wrote the reports of {result.label} to {output_directory}.")


def write_table(
    *, table: pd.DataFrame, output_file: pathlib.Path, na_rep: str = "nan"
) -> None:
    """Write a table as CSV with 17 significant digits."""
    table.to_csv(
        output_file, index=False, float_format=FLOAT_FORMAT, na_rep=na_rep
    )


def write_comparison(
    *, table: pd.DataFrame, output_directory: pathlib.Path
) -> pathlib.Path:
    """Write the comparison table, unreached cutoffs are marked as such."""
    output_directory.mkdir(parents=True, exist_ok=True)
    output_file = output_directory / COMPARISON_FILE
    write_table(table=table, output_file=output_file, na_rep=UNREACHED)
    return output_file


def write_study(
    *, table: pd.DataFrame, output_directory: pathlib.Path
) -> pathlib.Path:
    """Write the ranked study table."""
    output_directory.mkdir(parents=True, exist_ok=True)
    output_file = output_directory / STUDY_FILE
    write_table(table=table, output_file=output_file)
    return output_file


def write_json(*, content: Dict[str, Any], output_file: pathlib.Path) -> None:
    """Write a mapping as indented JSON."""
    with open(output_file, "w", encoding="utf-8") as target:
        json.dump(_jsonable(content), target, indent=2, sort_keys=True)
        target.write("\n")


def write_json_lines(
    *, entries: Iterable[Dict[str, Any]], output_file: pathlib.Path
) -> None:
    """Write one JSON object per line."""
    with open(output_file, "w", encoding="utf-8") as target:
        for entry in entries:
            target.write(json.dumps(_jsonable(entry), sort_keys=True))
            target.write("\n")


class LpDumper:  # pylint: disable=too-few-public-methods
    """LP sink that writes every trained LP to its own JSON file."""

    def __init__(self, output_directory: pathlib.Path):
        """Create the dumper, the directory is created on the first LP."""
        self.output_directory = output_directory
        self.count = 0

    def __call__(self, payload: Dict[str, Any]) -> None:
        """Write one LP."""
        self.output_directory.mkdir(parents=True, exist_ok=True)
        name = (
            f"lp_major{payload.get('major', 0):03d}_"
            f"{payload.get('index', self.count):04d}.json"
        )
        write_json(content=payload, output_file=self.output_directory / name)
        self.count += 1


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(entry) for key, entry in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(entry) for entry in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.generic):
        value = value.item()
    # strict JSON has no NaN or infinity
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value
