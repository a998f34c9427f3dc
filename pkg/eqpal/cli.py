"""Command line interface: single runs, method comparisons and studies."""

import dataclasses
import logging
import pathlib
from typing import Callable, List, Optional, Tuple, TypeVar

import click
import scipy.linalg

from eqpal import __version__
from eqpal.io.config_loader import ConfigError, load_config
from eqpal.io.report_writer import (
    LpDumper,
    write_comparison,
    write_run,
    write_study,
)
from eqpal.methods.elemental_system import SolverError
from eqpal.methods.experiment import (
    RunConfig,
    RunResult,
    StudyKind,
    comparison_table,
    compute_reference_objective,
    run_optimization,
    run_study,
    unique_labels,
)

log = logging.getLogger(__name__)

T = TypeVar("T")

EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3

_LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)

_path = click.Path(path_type=pathlib.Path)


@click.group()
@click.option(
    "-v", "--verbose", count=True, help="-v for info, -vv for debug output."
)
@click.version_option(__version__)
def cli(verbose: int) -> None:
    """Augmented Lagrangian trust-region optimization with EQP models."""
    logging.basicConfig(
        level=_LOG_LEVELS[min(verbose, len(_LOG_LEVELS) - 1)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.argument("config_file", type=_path)
@click.option("--out", type=_path, default=None, help="Output directory.")
@click.option(
    "--dump-lp", is_flag=True, help="Write every trained LP as JSON file."
)
def run(
    config_file: pathlib.Path, out: Optional[pathlib.Path], dump_lp: bool
) -> None:
    """Run the optimization described by CONFIG_FILE."""
    run_config = _load(config_file)
    output_directory = run_config.output_directory if out is None else out
    lp_sink = LpDumper(output_directory / "lp") if dump_lp else None

    result = _guarded(lambda: run_optimization(run_config, lp_sink=lp_sink))
    write_run(result=result, output_directory=output_directory)
    if result.failure is not None:
        raise click.exceptions.Exit(EXIT_SOLVER_ERROR)


@cli.command()
@click.argument("config_files", type=_path, nargs=-1, required=True)
@click.option("--out", type=_path, default=None, help="Output directory.")
def compare(
    config_files: Tuple[pathlib.Path, ...], out: Optional[pathlib.Path]
) -> None:
    """Run and compare the methods of at least two CONFIG_FILES."""
    if len(config_files) < 2:
        raise click.UsageError("compare needs at least two config files.")
    run_configs = [_load(config_file) for config_file in config_files]
    output_directory = (
        run_configs[0].output_directory if out is None else out
    )

    results: List[RunResult] = []
    for label, run_config in zip(
        unique_labels([str(config.label) for config in run_configs]),
        run_configs,
    ):
        result = _guarded(lambda config=run_config: run_optimization(config))
        write_run(result=result, output_directory=output_directory / label)
        results.append(result)

    j_star = _guarded(lambda: _shared_reference(run_configs))
    table = comparison_table(results, j_star=j_star)
    output_file = write_comparison(
        table=table, output_directory=output_directory
    )
    click.echo(f"comparison written to {output_file}")
    if any(result.failure is not None for result in results):
        raise click.exceptions.Exit(EXIT_SOLVER_ERROR)


@cli.command()
@click.argument(
    "kind", type=click.Choice([kind.value for kind in StudyKind])
)
@click.argument("config_file", type=_path)
@click.option("--out", type=_path, default=None, help="Output directory.")
@click.option(
    "--workers", type=click.IntRange(min=1), default=1, show_default=True
)
def study(
    kind: str,
    config_file: pathlib.Path,
    out: Optional[pathlib.Path],
    workers: int,
) -> None:
    """Run the KIND parameter study around CONFIG_FILE."""
    base = _load(config_file)
    if out is not None:
        base = dataclasses.replace(base, output_directory=out)

    results, table = _guarded(
        lambda: run_study(StudyKind(kind), base, workers=workers)
    )
    for result in results:
        write_run(
            result=result, output_directory=result.config.output_directory
        )
    output_file = write_study(
        table=table, output_directory=base.output_directory
    )
    failed = [result.label for result in results if result.failure]
    if failed:
        log.warning(f"study runs failed: {', '.join(failed)}")
    click.echo(f"study written to {output_file}")


def _load(config_file: pathlib.Path) -> RunConfig:
    try:
        return load_config(config_file=config_file)
    except (ConfigError, IOError) as error:
        log.error(f"could not load {config_file}: {error}")
        click.echo(f"Error: {error}", err=True)
        raise click.exceptions.Exit(EXIT_CONFIG_ERROR) from error


def _guarded(action: Callable[[], T]) -> T:
    try:
        return action()
    except (SolverError, scipy.linalg.LinAlgError) as error:
        log.error(f"solver failure: {error}")
        click.echo(f"Error: {error}", err=True)
        raise click.exceptions.Exit(EXIT_SOLVER_ERROR) from error


def _shared_reference(run_configs: List[RunConfig]) -> Optional[float]:
    for run_config in run_configs:
        if run_config.reference.objective is not None:
            return run_config.reference.objective
    for run_config in run_configs:
        if run_config.reference.compute:
            return compute_reference_objective(run_config)
    return None
