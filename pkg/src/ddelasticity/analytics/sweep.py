"""
Experiment grids over (h, N, θ, S̃): one solve or optimisation per cell.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..config.loader import InterfacePreconditioner, RunConfig, RunMode, build_run_config
from ..core.problem import build_problem
from ..core.solver import CSV_COLUMNS
from ..execution.parallel import SubdomainExecutor
from ..optimization.topopt import run_topopt
from ..utils.exceptions import BaseDDError
from ..utils.logging import logger
from .reporting import estimate_parallel_time, write_csv

SWEEP_COLUMNS = CSV_COLUMNS + (
    "pcg_per_application",
    "estimated_seconds",
    "fixed_point_iters",
    "avg_gmres",
    "table_cell",
    "status",
    "error",
)

sweep_logger = logger.getChild("sweep")


def cell_config(
    cfg: RunConfig,
    h: float,
    domains: int,
    theta: Optional[float],
    precond: InterfacePreconditioner,
) -> RunConfig:
    """Copy of ``cfg`` narrowed to one grid cell (revalidated)."""
    overrides: Dict[str, Any] = {
        "mode": cfg.sweep.task.value,
        "problem": {"h": h, "domains": domains, "px": None, "py": None},
        "solver": {"precond": InterfacePreconditioner(precond).value},
    }
    if theta is not None:
        overrides["solver"]["interface"] = {"theta": theta}
    return build_run_config(cfg.model_dump(mode="json"), overrides)


def _solve_row(cell: RunConfig, executor: Optional[SubdomainExecutor]) -> Dict[str, Any]:
    problem = build_problem(cell.problem, executor)
    _, report = problem.solve(cell.solver)
    row = report.to_csv_row()
    row["pcg_per_application"] = round(report.pcg_per_application, 3)
    if problem.topology.n_faces and report.precond is InterfacePreconditioner.HNORM:
        row["estimated_seconds"] = estimate_parallel_time(report, problem.topology).total_seconds
    row["status"] = "ok" if report.converged else "not-converged"
    return row


def _topopt_row(cell: RunConfig, executor: Optional[SubdomainExecutor]) -> Dict[str, Any]:
    report = run_topopt(cell.problem, cell.oc, cell.solver, executor)
    return {
        "fixed_point_iters": report.iterations,
        "avg_gmres": round(report.average_gmres, 3),
        "table_cell": report.table_cell(),
        "converged": report.converged,
        "status": "ok" if report.converged else "not-converged",
    }


def run_sweep(cfg: RunConfig, executor: Optional[SubdomainExecutor] = None) -> List[Dict[str, Any]]:
    """
    Run every cell of ``cfg.sweep``; failed cells become rows with ``status=failed``.

    Returns:
        One row per (h, N, θ, S̃) in table order
    """
    rows: List[Dict[str, Any]] = []
    cells = cfg.sweep.cells()
    sweep_logger.info(f"Sweep of {len(cells)} cells ({cfg.sweep.task.value})")

    for h, domains, theta, precond in cells:
        base = {
            "h": h,
            "N": domains,
            "theta": theta if theta is not None else cfg.solver.interface.theta,
            "precond": precond.value,
        }
        if precond is not InterfacePreconditioner.HNORM:
            base["theta"] = ""
        try:
            cell = cell_config(cfg, h, domains, theta, precond)
            if cfg.sweep.task is RunMode.TOPOPT:
                row = {**base, **_topopt_row(cell, executor)}
            else:
                row = {**base, **_solve_row(cell, executor)}
        except (BaseDDError, np.linalg.LinAlgError, ValueError) as e:
            sweep_logger.warning(f"Cell h={h:g}, N={domains}, S̃={precond.value} failed: {e}")
            row = {**base, "status": "failed", "error": str(e)}
        rows.append(row)
        sweep_logger.info(f"Cell h={h:g}, N={domains}, S̃={precond.value}: {row.get('status')}")
    return rows


def write_sweep(path: Path, rows: List[Dict[str, Any]]) -> Path:
    return write_csv(path, SWEEP_COLUMNS, rows)
