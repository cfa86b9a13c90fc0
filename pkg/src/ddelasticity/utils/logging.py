"""
Logging configuration for ddelasticity.

Krylov loops emit one DEBUG record per iteration through ``log_iteration``.
Those records carry ``solver``, ``iteration`` and ``residual`` attributes;
``SolverFormatter`` renders them as a fixed-width convergence column and
``IterationFilter`` can keep them off the console while a log file still
receives the full history.
"""
import logging
import sys
from pathlib import Path
from typing import Optional

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
DATE_FORMAT = "%H:%M:%S"


class SolverFormatter(logging.Formatter):
    """Formatter that lines up per-iteration residuals."""

    def __init__(self) -> None:
        super().__init__(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)

    def formatMessage(self, record: logging.LogRecord) -> str:
        fields = vars(record)
        if "iteration" in fields:
            head = f"{fields['solver']:<6} it {fields['iteration']:>4d}  res {fields['residual']:.3e}"
            record.message = f"{head}  {record.message}" if record.message else head
        return super().formatMessage(record)


class IterationFilter(logging.Filter):
    """Drop per-iteration records."""

    def filter(self, record: logging.LogRecord) -> bool:
        return "iteration" not in vars(record)


def log_iteration(
    log: logging.Logger,
    solver: str,
    iteration: int,
    residual: float,
    message: str = "",
) -> None:
    """Emit one DEBUG convergence record for a Krylov iteration."""
    if log.isEnabledFor(logging.DEBUG):
        log.debug(message, extra={"solver": solver, "iteration": iteration, "residual": residual})


def setup_logging(
    level: str = "INFO",
    log_file: Optional[Path] = None,
    console: bool = True,
    console_iterations: bool = True,
) -> logging.Logger:
    """
    Setup logging configuration for ddelasticity.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional path to log file
        console: Whether to log to console
        console_iterations: Whether per-iteration residuals reach the console

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger("ddelasticity")
    logger.setLevel(getattr(logging, level.upper()))

    for handler in logger.handlers:
        handler.close()
    logger.handlers.clear()

    formatter = SolverFormatter()

    if console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(logging.DEBUG)
        console_handler.setFormatter(formatter)
        if not console_iterations:
            console_handler.addFilter(IterationFilter())
        logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name: str = "ddelasticity") -> logging.Logger:
    """Get a logger instance with the given name."""
    return logging.getLogger(name)


logger = setup_logging(level="WARNING")
