"""Variable Thickness Sheet topology optimisation."""
from .topopt import (
    DensityField,
    TopOptReport,
    adaptive_tolerance,
    oc_update,
    run_topopt,
    sensitivity,
)

__all__ = [
    "DensityField",
    "TopOptReport",
    "adaptive_tolerance",
    "oc_update",
    "run_topopt",
    "sensitivity",
]
