"""Run configuration models and YAML loading."""
from .loader import (
    AdaptiveToleranceConfig,
    ExecutionConfig,
    FractionalNormConfig,
    InterfacePreconditioner,
    KrylovConfig,
    LanczosMode,
    LoadConfig,
    LoggingConfig,
    NormVariant,
    OcConfig,
    ProblemConfig,
    RunConfig,
    RunMode,
    SolverConfig,
    SweepConfig,
    build_run_config,
    load_run_config,
    load_yaml_file,
    save_run_config,
)

__all__ = [
    "AdaptiveToleranceConfig",
    "ExecutionConfig",
    "FractionalNormConfig",
    "InterfacePreconditioner",
    "KrylovConfig",
    "LanczosMode",
    "LoadConfig",
    "LoggingConfig",
    "NormVariant",
    "OcConfig",
    "ProblemConfig",
    "RunConfig",
    "RunMode",
    "SolverConfig",
    "SweepConfig",
    "build_run_config",
    "load_run_config",
    "load_yaml_file",
    "save_run_config",
]
