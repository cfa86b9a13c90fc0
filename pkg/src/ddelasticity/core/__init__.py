"""Interface preconditioning, decomposed solvers and problem set-up."""
from .interface import (
    FacePreconditioner,
    InterfaceNorm,
    LanczosBasis,
    apply_fractional_inverse,
    apply_interface_preconditioner,
    build_face_preconditioner,
    lanczos_pencil,
    laplacian_solve,
    ritz_fractional_inverse,
)
from .problem import DecomposedProblem, build_problem
from .solver import (
    CSV_COLUMNS,
    BlockPreconditioner,
    SolveReport,
    apply_block_preconditioner,
    apply_system,
    build_block_preconditioner,
    exact_schur_dense,
    factorize_subdomains,
    relative_error,
    schur_matvec,
    solve_global,
    solve_monolithic,
    solve_schur_sequence,
)

__all__ = [
    "BlockPreconditioner",
    "CSV_COLUMNS",
    "DecomposedProblem",
    "FacePreconditioner",
    "InterfaceNorm",
    "LanczosBasis",
    "SolveReport",
    "apply_block_preconditioner",
    "apply_fractional_inverse",
    "apply_interface_preconditioner",
    "apply_system",
    "build_block_preconditioner",
    "build_face_preconditioner",
    "build_problem",
    "exact_schur_dense",
    "factorize_subdomains",
    "lanczos_pencil",
    "laplacian_solve",
    "relative_error",
    "ritz_fractional_inverse",
    "schur_matvec",
    "solve_global",
    "solve_monolithic",
    "solve_schur_sequence",
]
