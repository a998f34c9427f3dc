# type: ignore
"""Top level imports, for easier usage."""
from .data.problem import ALContext, ElementKernel, PrimalAdjointPair, Problem
from .data.reduced import (
    ConstraintFamily,
    EqpTolerances,
    EqpWeights,
    ReducedBasis,
    ReducedSolution,
    TrainingSet,
)
from .io.config_loader import ConfigError, load_config, parse_config
from .io.report_writer import write_run
from .methods.auglag import (
    AuglagConfig,
    SubsolverMethod,
    run_auglag,
    update_multipliers,
)
from .methods.burgers_testbed import BurgersConfig, make_problem, prepare
from .methods.elemental_system import HdmSolver, SolverError
from .methods.eqp import (
    EqpPreset,
    assemble_training_lp,
    hyper_evaluate,
    train_weights,
)
from .methods.eqpbtr import (
    EqpSettings,
    ToleranceSchedule,
    TrustRegionSubsolver,
    build_model,
    schedule_tolerances,
)
from .methods.experiment import (
    RunConfig,
    StudyKind,
    comparison_table,
    run_optimization,
    run_study,
)
from .methods.lp import solve_lp
from .methods.metrics import compute_si
from .methods.rom import gram_schmidt, pod
from .methods.trust_region import TrConfig

__version__ = "0.1.0"
