"""
ddelasticity - domain-decomposed 2D elasticity with fractional-norm interface preconditioning.
"""
__version__ = "0.1.0"

from .config.loader import RunConfig, load_run_config
from .core.problem import DecomposedProblem, build_problem
from .optimization.topopt import run_topopt

__all__ = [
    "DecomposedProblem",
    "RunConfig",
    "__version__",
    "build_problem",
    "load_run_config",
    "run_topopt",
]
