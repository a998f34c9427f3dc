#! /usr/bin/env python3

import argparse
import json
import pathlib
import sys
from typing import List, Optional

from eqpal.io.config_loader import config_to_dict
from eqpal.methods.auglag import AuglagConfig, SubsolverMethod
from eqpal.methods.burgers_testbed import BurgersConfig
from eqpal.methods.experiment import RunConfig
from eqpal.methods.trust_region import TrConfig


def setup_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="writes one run configuration per subproblem model"
    )
    parser.add_argument(
        "-o",
        "--output",
        help="directory where the configuration files are written",
        type=pathlib.Path,
        required=True,
    )
    parser.add_argument(
        "--methods",
        help="subproblem models to create a configuration for",
        nargs="+",
        choices=[method.value for method in SubsolverMethod],
        default=[method.value for method in SubsolverMethod],
    )
    parser.add_argument(
        "--n_cells",
        default=128,
        help="number of finite volume cells of the testbed",
        type=int,
    )
    parser.add_argument(
        "--n_design",
        default=8,
        help="number of source amplitudes",
        type=int,
    )
    parser.add_argument(
        "--max_major_iters",
        default=30,
        help="cap on augmented Lagrangian iterations",
        type=int,
    )
    parser.add_argument(
        "--max_tr_iters",
        default=50,
        help="cap on trust-region iterations per subproblem",
        type=int,
    )
    parser.add_argument(
        "--seed",
        default=0,
        help="seed of the power iteration start vectors",
        type=int,
    )
    return parser


def create_run_config(
    *,
    method: SubsolverMethod,
    n_cells: int,
    n_design: int,
    max_major_iters: int,
    max_tr_iters: int,
    seed: int = 0,
    output_directory: pathlib.Path = pathlib.Path("results"),
    label: Optional[str] = None,
) -> RunConfig:
    return RunConfig(
        method=method,
        seed=seed,
        label=label,
        output_directory=output_directory,
        testbed=BurgersConfig(n_cells=n_cells, n_design=n_design),
        auglag=AuglagConfig(max_major_iters=max_major_iters, method=method),
        trustregion=TrConfig(max_iters=max_tr_iters),
    )


def create_configs(args: argparse.Namespace) -> List[pathlib.Path]:
    args.output.mkdir(parents=True, exist_ok=True)
    written = []
    for name in args.methods:
        run_config = create_run_config(
            method=SubsolverMethod(name),
            n_cells=args.n_cells,
            n_design=args.n_design,
            max_major_iters=args.max_major_iters,
            max_tr_iters=args.max_tr_iters,
            seed=args.seed,
            output_directory=pathlib.Path("results") / name,
        )
        config_file = args.output / f"{name}.json"
        config_file.write_text(
            json.dumps(config_to_dict(run_config), indent=2) + "\n"
        )
        written.append(config_file)
    return written


if __name__ == "__main__":
    parser = setup_arg_parser()
    args = parser.parse_args()

    try:
        for path in create_configs(args):
            print(f"wrote {path}")
    except (OSError, ValueError) as exc:
        print(f"could not create configurations: {exc}", file=sys.stderr)
        sys.exit(1)
