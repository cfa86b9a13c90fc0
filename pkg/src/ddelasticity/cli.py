"""
Command-line entry point for ddelasticity.

Usage:
    ddelasticity solve --h 1/32 --domains 4 --precond hnorm --theta 0.5
    ddelasticity topopt --config config/default.yaml --out results/vts
    ddelasticity sweep --config config/sweep_solve.yaml
    python -m ddelasticity solve --check
"""
import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .analytics.reporting import (
    emit_fields,
    estimate_parallel_time,
    write_estimate,
    write_iterations,
    write_residuals,
    write_topopt,
)
from .analytics.sweep import run_sweep, write_sweep
from .config.loader import InterfacePreconditioner, RunConfig, RunMode, load_run_config, save_run_config
from .core.problem import build_problem
from .core.solver import relative_error, solve_monolithic
from .execution.parallel import SubdomainExecutor
from .fem.assembly import compliance
from .optimization.topopt import DensityField, run_topopt
from .utils.exceptions import BaseDDError, ConvergenceError
from .utils.logging import logger, setup_logging

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_ERROR = 2

cli_logger = logger.getChild("cli")

PRECOND_CHOICES = [p.value for p in InterfacePreconditioner]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddelasticity",
        description="Domain-decomposed 2D elasticity with fractional-norm interface preconditioning",
        epilog="Values from --config are overridden by explicit flags",
    )
    subparsers = parser.add_subparsers(dest="mode", required=True)

    for mode in RunMode:
        sub = subparsers.add_parser(mode.value, help=f"Run a {mode.value}")
        sweep = mode is RunMode.SWEEP
        many = "+" if sweep else None

        sub.add_argument("--config", type=Path, help="YAML run configuration")
        sub.add_argument("--out", type=Path, help="Output directory")
        sub.add_argument(
            "--h", nargs=many, metavar="H", help="Mesh size, float or fraction such as 1/32"
        )
        sub.add_argument("--domains", type=int, nargs=many, metavar="N", help="Number of subdomains")
        sub.add_argument("--theta", type=float, nargs=many, help="Fractional index θ in [0, 1]")
        sub.add_argument("--precond", choices=PRECOND_CHOICES, nargs=many, help="Interface block S̃")
        sub.add_argument("--tol", type=float, help="Outer Krylov relative tolerance")
        sub.add_argument("--workers", type=int, help="Worker threads for subdomain tasks")
        sub.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
        if sweep:
            sub.add_argument(
                "--task", choices=[RunMode.SOLVE.value, RunMode.TOPOPT.value], help="What each cell runs"
            )
        else:
            sub.add_argument(
                "--check", action="store_true", help="Compare against a monolithic direct solve"
            )
            sub.add_argument("--no-vtk", action="store_true", help="Skip the legacy-VTK field file")

    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Nested config overrides for the flags that were given."""
    mode = RunMode(args.mode)
    out: Dict[str, Any] = {"mode": mode.value}
    problem: Dict[str, Any] = {}
    solver: Dict[str, Any] = {}
    sweep: Dict[str, Any] = {}

    if mode is RunMode.SWEEP:
        if args.h is not None:
            sweep["h"] = list(args.h)
        if args.domains is not None:
            sweep["domains"] = list(args.domains)
        if args.theta is not None:
            sweep["thetas"] = list(args.theta)
        if args.precond is not None:
            sweep["preconds"] = list(args.precond)
        if args.task is not None:
            sweep["task"] = args.task
    else:
        if args.h is not None:
            problem["h"] = args.h
        if args.domains is not None:
            problem.update(domains=args.domains, px=None, py=None)
        if args.theta is not None:
            solver["interface"] = {"theta": args.theta}
        if args.precond is not None:
            solver["precond"] = args.precond
        if args.check:
            out["check_monolithic"] = True
        if args.no_vtk:
            out["write_vtk"] = False

    if args.tol is not None:
        solver["krylov"] = {"tolerance": args.tol}
    if args.workers is not None:
        out["execution"] = {"max_workers": args.workers}
    if args.out is not None:
        out["output_dir"] = str(args.out)
    if args.verbose:
        out["logging"] = {"level": "DEBUG"}

    for key, section in (("problem", problem), ("solver", solver), ("sweep", sweep)):
        if section:
            out[key] = section
    return out


def run_solve(cfg: RunConfig, executor: SubdomainExecutor, out_dir: Path) -> int:
    problem = build_problem(cfg.problem, executor)
    u, report = problem.solve(cfg.solver)

    if cfg.check_monolithic:
        reference = solve_monolithic(problem.assemble())
        error = relative_error(u, reference)
        report.extra["monolithic_error"] = error
        cli_logger.info(f"Relative error against the monolithic solve: {error:.3e}")

    write_iterations(out_dir / "iterations.csv", [report])
    write_residuals(out_dir / "residuals.csv", report.stats)
    emit_fields(problem.mesh, problem.dofmap.to_global(u), out_dir, write_vtk=cfg.write_vtk)
    if problem.topology.n_faces and report.precond is InterfacePreconditioner.HNORM:
        estimate = estimate_parallel_time(report, problem.topology)
        write_estimate(out_dir / "estimate.csv", estimate)
        cli_logger.info(f"Estimated parallel time: {estimate.total_seconds:.4g} s")

    cli_logger.info(
        f"{report.method} with S̃={report.precond.value}: {report.outer_iterations} iterations, "
        f"avg inner PCG {report.avg_inner_pcg:.2f}, residual {report.stats.final_residual:.3e}, "
        f"compliance {compliance(u, problem.load):.6e}"
    )
    if not report.converged:
        cli_logger.error(f"Solve did not converge within {cfg.solver.krylov.max_iterations} iterations")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def run_optimization(cfg: RunConfig, executor: SubdomainExecutor, out_dir: Path) -> int:
    problem = build_problem(cfg.problem, executor)
    last: Dict[str, np.ndarray] = {}

    def on_step(step: int, density: DensityField, u_global: np.ndarray) -> None:
        last["u"] = u_global
        if cfg.oc.write_history:
            emit_fields(
                problem.mesh,
                u_global,
                out_dir / "history",
                density=density.values,
                write_vtk=False,
                stem=f"fields_{step:03d}",
                density_stem=f"density_{step:03d}",
            )

    try:
        report = run_topopt(cfg.problem, cfg.oc, cfg.solver, executor, problem=problem, on_step=on_step)
    except ConvergenceError as e:
        if e.report is not None:
            write_topopt(out_dir / "topopt.csv", e.report)
        raise

    write_topopt(out_dir / "topopt.csv", report)
    if "u" in last:
        emit_fields(problem.mesh, last["u"], out_dir, density=report.density.values, write_vtk=cfg.write_vtk)
    cli_logger.info(
        f"Topology optimisation: {report.table_cell()} (fixed-point iterations, avg GMRES), "
        f"final compliance {report.compliance[-1]:.6e}"
    )
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def run_sweep_command(cfg: RunConfig, executor: SubdomainExecutor, out_dir: Path) -> int:
    rows: List[Dict[str, Any]] = run_sweep(cfg, executor)
    path = write_sweep(out_dir / "sweep.csv", rows)
    failed = sum(1 for r in rows if r.get("status") == "failed")
    cli_logger.info(f"Sweep wrote {len(rows)} rows to {path} ({failed} failed)")
    return EXIT_OK


COMMANDS = {
    RunMode.SOLVE: run_solve,
    RunMode.TOPOPT: run_optimization,
    RunMode.SWEEP: run_sweep_command,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = load_run_config(args.config, overrides_from_args(args))
    except BaseDDError as e:
        setup_logging(level="ERROR")
        cli_logger.error(str(e))
        return EXIT_ERROR

    log_file = Path(cfg.logging.file) if cfg.logging.file else None
    setup_logging(
        level=cfg.logging.level,
        log_file=log_file,
        console=cfg.logging.console,
        console_iterations=cfg.logging.console_iterations,
    )

    out_dir = Path(cfg.output_dir)
    cli_logger.info(f"Mode {cfg.mode.value}, writing to {out_dir}")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        save_run_config(cfg, out_dir / "config.resolved.yaml")
        with SubdomainExecutor(cfg.execution.max_workers) as executor:
            return COMMANDS[cfg.mode](cfg, executor, out_dir)
    except ConvergenceError as e:
        cli_logger.error(str(e))
        return EXIT_NOT_CONVERGED
    except BaseDDError as e:
        cli_logger.error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR
    except OSError as e:
        cli_logger.error(f"Cannot write to {out_dir}: {e}")
        return EXIT_ERROR


__all__ = ["build_parser", "main", "overrides_from_args"]
