import json

import numpy as np
import pandas as pd

from eqpal.io.report_writer import (
    COMPARISON_FILE,
    HISTORY_FILE,
    STUDY_FILE,
    SUMMARY_FILE,
    TIMINGS_FILE,
    TRACE_FILE,
    LpDumper,
    write_comparison,
    write_json,
    write_json_lines,
    write_run,
    write_study,
    write_table,
)
from eqpal.methods.auglag import MajorRecord
from eqpal.methods.experiment import RunConfig, RunResult
from eqpal.methods.metrics import compute_history, compute_timings


def get_result() -> RunResult:
    records = [
        MajorRecord(
            iteration=iteration,
            theta=np.zeros(2),
            tau=10.0,
            pi=0.1,
            omega=0.1,
            mu=np.array([0.1, 0.2]),
            objective=objective,
            c_inf=1e-3,
            c_norm=1e-3,
            chi_inf=1e-4,
            feasible=True,
            subproblem_iterations=2,
            wall_time=0.25,
            trace=(
                {
                    "major": iteration,
                    "ratio": np.nan,
                    "accepted": np.True_,
                    "usage_fraction": 1.0,
                },
                {
                    "major": iteration,
                    "ratio": 1.0,
                    "accepted": True,
                    "usage_fraction": 0.25,
                },
            ),
            counts={"hdm": 4, "rom": 1, "eqp": 2},
        )
        for iteration, objective in enumerate([2.0, 1.5])
    ]
    return RunResult(
        config=RunConfig(label="demo"),
        records=tuple(records),
        converged=False,
        failure=None,
        mu=records[-1].mu,
        j_initial=2.0,
        j_reference=1.5,
        wall_time=0.5,
        counts={"hdm": 4, "rom": 1, "eqp": 2},
        history=compute_history(records=records, j_star=1.5, j_initial=2.0),
        timings=compute_timings(records),
    )


def test_write_run(tmp_path):
    output_directory = tmp_path / "run"

    write_run(result=get_result(), output_directory=output_directory)

    history = pd.read_csv(output_directory / HISTORY_FILE)
    assert history["j"].tolist() == [2.0, 1.5]
    assert history["S"].tolist() == [0.25, 0.0]
    assert "wall_time" not in history.columns
    assert history["usage_min"].tolist() == [25.0, 25.0]
    assert history["usage_max"].tolist() == [100.0, 100.0]
    timings = pd.read_csv(output_directory / TIMINGS_FILE)
    assert timings["cumulative_wall_time"].tolist() == [0.25, 0.5]

    lines = (output_directory / TRACE_FILE).read_text().splitlines()
    assert len(lines) == 4
    assert json.loads(lines[0]) == {
        "accepted": True,
        "major": 0,
        "ratio": "nan",
        "usage_fraction": 1.0,
    }

    summary = json.loads((output_directory / SUMMARY_FILE).read_text())
    assert summary["label"] == "demo"
    assert summary["method"] == "eqp"
    assert summary["majors"] == 2
    assert summary["tr_iterations"] == 4
    assert summary["mu"] == [0.1, 0.2]
    assert summary["failure"] is None


def test_write_table_keeps_all_digits(tmp_path):
    output_file = tmp_path / "table.csv"

    write_table(
        table=pd.DataFrame({"value": [0.1 + 0.2, np.nan]}),
        output_file=output_file,
    )

    assert output_file.read_text().splitlines() == [
        "value",
        "0.30000000000000004",
        "nan",
    ]


def test_write_comparison_marks_unreached_cutoffs(tmp_path):
    table = pd.DataFrame(
        {"label": ["hdm", "eqp"], "cost": [1.5, np.nan], "reached": [1, 0]}
    )

    output_file = write_comparison(table=table, output_directory=tmp_path)

    assert output_file == tmp_path / COMPARISON_FILE
    assert output_file.read_text().splitlines()[2] == "eqp,unreached,0"


def test_write_study(tmp_path):
    table = pd.DataFrame({"rank": [1, 2], "label": ["a", "b"]})

    output_file = write_study(table=table, output_directory=tmp_path / "s")

    assert output_file == tmp_path / "s" / STUDY_FILE
    assert pd.read_csv(output_file)["label"].tolist() == ["a", "b"]


def test_write_json_converts_numpy_and_non_finite_values(tmp_path):
    output_file = tmp_path / "content.json"

    write_json(
        content={
            "array": np.array([1.0, np.inf]),
            "flag": np.bool_(True),
            "count": np.int64(3),
            "missing": np.nan,
            "nested": {1: (-np.inf,)},
        },
        output_file=output_file,
    )

    assert json.loads(output_file.read_text()) == {
        "array": [1.0, "inf"],
        "flag": True,
        "count": 3,
        "missing": "nan",
        "nested": {"1": ["-inf"]},
    }


def test_write_json_lines_of_nothing(tmp_path):
    output_file = tmp_path / "empty.jsonl"

    write_json_lines(entries=[], output_file=output_file)

    assert output_file.read_text() == ""


def test_lp_dumper(tmp_path):
    dumper = LpDumper(tmp_path / "lp")

    dumper({"major": 2, "index": 5, "weights": np.ones(2)})
    dumper({"weights": [0.0]})

    assert dumper.count == 2
    assert sorted(path.name for path in (tmp_path / "lp").iterdir()) == [
        "lp_major000_0001.json",
        "lp_major002_0005.json",
    ]
    content = json.loads(
        (tmp_path / "lp" / "lp_major002_0005.json").read_text()
    )
    assert content["weights"] == [1.0, 1.0]
