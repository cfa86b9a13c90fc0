"""
Analytics Module

Result files, parallel-time estimates and experiment sweeps.
"""
from .reporting import (
    TimeEstimate,
    emit_fields,
    estimate_parallel_time,
    read_fields_csv,
    write_csv,
    write_estimate,
    write_iterations,
    write_residuals,
    write_topopt,
)
from .sweep import SWEEP_COLUMNS, cell_config, run_sweep, write_sweep

__all__ = [
    "SWEEP_COLUMNS",
    "TimeEstimate",
    "cell_config",
    "emit_fields",
    "estimate_parallel_time",
    "read_fields_csv",
    "run_sweep",
    "write_csv",
    "write_estimate",
    "write_iterations",
    "write_residuals",
    "write_sweep",
    "write_topopt",
]
