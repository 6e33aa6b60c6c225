"""Structural-bias detection for Differential Evolution on the ``f0`` null objective."""

from .engine import (
    BatchDE,
    Crossover,
    DEConfig,
    Individual,
    Mutation,
    Population,
    RunResult,
    crossover_bin,
    crossover_exp,
    init_population,
    mutate,
    run,
)
from .experiment import (
    EmergenceTrace,
    GridResult,
    GridRow,
    GridSpec,
    derive_seed,
    rank_configs,
    run_config,
    run_emergence,
    run_grid,
)
from .metrics import BiasClass, SBConfig, SBReport, ad_pvalue, ad_statistic, by_adjust, classify, sb_score
from .objective import F0, ObjectiveSpec, evaluate_f0
from .sdis import RepairOutcome, SdisKind, repair

__version__ = "0.1.0"
