"""
Krylov solvers: right-preconditioned GMRES, flexible GMRES and PCG.

All three start from x0 = 0 and measure convergence by the relative residual
``‖b - Ax‖₂ / ‖b‖₂``. With right preconditioning that residual is the true
residual of the original system, so no preconditioned norm is ever reported.
"""
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from ..utils.exceptions import DimensionMismatchError, IndefiniteMatrixError
from ..utils.logging import get_logger, log_iteration

if TYPE_CHECKING:
    from ..config.loader import KrylovConfig

logger = get_logger(__name__)

Operator = Callable[[np.ndarray], np.ndarray]

# A Gram-Schmidt pass that keeps less than this fraction of the norm is repeated.
REORTH_FACTOR = 0.7
BREAKDOWN_RTOL = 1e-14


@dataclass
class KrylovStats:
    """Iteration counts and residual history of one Krylov solve."""
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)
    converged: bool = False
    inner_iteration_total: int = 0
    inner_iterations: List[int] = field(default_factory=list)
    final_residual: float = math.nan
    basis: Optional[np.ndarray] = None

    @property
    def average_inner_iterations(self) -> float:
        if not self.inner_iterations:
            return 0.0
        return self.inner_iteration_total / len(self.inner_iterations)

    def residual_rows(self) -> List[Tuple[int, float]]:
        """(iteration, relative residual) pairs for CSV export."""
        return list(enumerate(self.residual_history))


def as_operator(A: Any) -> Operator:
    """Turn a matrix, LinearOperator, or callable into a vector → vector function."""
    if A is None:
        return lambda x: np.array(x, dtype=float, copy=True)
    if isinstance(A, LinearOperator):
        return A.matvec
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return lambda x: A @ x
    if callable(A):
        return A
    raise TypeError(f"Cannot use {type(A).__name__} as a linear operator")


def _config(cfg: Optional["KrylovConfig"]) -> "KrylovConfig":
    from ..config.loader import KrylovConfig

    return cfg if cfg is not None else KrylovConfig()


def _arnoldi_gmres(
    apply_A: Any,
    b: np.ndarray,
    apply_Minv: Any,
    cfg: Optional["KrylovConfig"],
    flexible: bool,
) -> Tuple[np.ndarray, KrylovStats]:
    A = as_operator(apply_A)
    Minv = as_operator(apply_Minv)
    cfg = _config(cfg)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    stats = KrylovStats()
    name = "FGMRES" if flexible else "GMRES"

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        stats.converged = True
        stats.final_residual = 0.0
        stats.residual_history.append(0.0)
        return np.zeros(n), stats

    x = np.zeros(n)
    r = b.copy()
    beta = bnorm
    stats.residual_history.append(1.0)
    tol = cfg.tolerance
    max_iterations = cfg.max_iterations
    restart = cfg.restart or max_iterations
    true_rel = 1.0

    while stats.iterations < max_iterations:
        m = min(restart, max_iterations - stats.iterations, n)
        V = np.zeros((n, m + 1))
        Z = np.zeros((n, m)) if flexible else None
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[:, 0] = r / beta

        k = 0
        breakdown = False
        for j in range(m):
            z = Minv(V[:, j])
            if flexible:
                Z[:, j] = z
            w = np.asarray(A(z), dtype=float)
            if w.shape[0] != n:
                raise DimensionMismatchError("operator output", n, w.shape[0])

            # modified Gram-Schmidt, repeated once on loss of orthogonality
            w_norm = float(np.linalg.norm(w))
            for _ in range(2):
                before = float(np.linalg.norm(w))
                for i in range(j + 1):
                    hij = float(V[:, i] @ w)
                    H[i, j] += hij
                    w -= hij * V[:, i]
                if np.linalg.norm(w) >= REORTH_FACTOR * before:
                    break
            H[j + 1, j] = float(np.linalg.norm(w))
            breakdown = H[j + 1, j] <= BREAKDOWN_RTOL * max(w_norm, 1e-300)
            if not breakdown:
                V[:, j + 1] = w / H[j + 1, j]

            for i in range(j):
                temp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = temp
            denom = math.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            k = j + 1
            stats.iterations += 1
            estimate = abs(g[j + 1]) / bnorm
            stats.residual_history.append(estimate)
            log_iteration(logger, name, stats.iterations, estimate)
            if estimate <= tol or breakdown:
                break

        diag = np.abs(np.diag(H[:k, :k]))
        k_eff = k
        while k_eff > 0 and diag[k_eff - 1] == 0.0:
            k_eff -= 1
        y = scipy.linalg.solve_triangular(H[:k_eff, :k_eff], g[:k_eff]) if k_eff else np.zeros(0)
        if flexible:
            x = x + Z[:, :k_eff] @ y
        else:
            x = x + Minv(V[:, :k_eff] @ y)

        if cfg.keep_basis:
            stats.basis = V[:, :k].copy()

        r = b - A(x)
        beta = float(np.linalg.norm(r))
        true_rel = beta / bnorm
        if true_rel <= tol:
            stats.converged = True
            break
        if beta == 0.0:
            break

    stats.final_residual = true_rel
    if not stats.converged:
        logger.warning(
            f"{name} did not converge: {stats.iterations} iterations, relative residual {true_rel:.3e}"
        )
    return x, stats


def gmres(
    apply_A: Any,
    b: np.ndarray,
    apply_Minv: Any = None,
    cfg: Optional["KrylovConfig"] = None,
) -> Tuple[np.ndarray, KrylovStats]:
    """
    Right-preconditioned GMRES for ``A M⁻¹ x̃ = b``, ``x = M⁻¹ x̃``.

    Args:
        apply_A: System operator
        b: Right-hand side
        apply_Minv: Fixed preconditioner application (identity if None)
        cfg: Tolerance, iteration cap and restart length

    Returns:
        (x, KrylovStats); non-convergence is flagged, the best iterate returned
    """
    return _arnoldi_gmres(apply_A, b, apply_Minv, cfg, flexible=False)


def fgmres(
    apply_A: Any,
    b: np.ndarray,
    apply_Minv: Any = None,
    cfg: Optional["KrylovConfig"] = None,
) -> Tuple[np.ndarray, KrylovStats]:
    """
    Flexible GMRES: the preconditioner may change from one iteration to the next.

    The preconditioned vectors ``z_j = M_j⁻¹ v_j`` are stored and the iterate is
    built from them, so inexact inner solves are allowed.
    """
    return _arnoldi_gmres(apply_A, b, apply_Minv, cfg, flexible=True)


def pcg(
    apply_A: Any,
    b: np.ndarray,
    apply_Minv: Any = None,
    cfg: Optional["KrylovConfig"] = None,
) -> Tuple[np.ndarray, KrylovStats]:
    """
    Preconditioned conjugate gradients for SPD A with SPD preconditioner.

    Raises:
        IndefiniteMatrixError: If ``pᵀAp <= 0`` or ``rᵀM⁻¹r <= 0`` is met
    """
    A = as_operator(apply_A)
    Minv = as_operator(apply_Minv)
    cfg = _config(cfg)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    stats = KrylovStats()

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        stats.converged = True
        stats.final_residual = 0.0
        stats.residual_history.append(0.0)
        return np.zeros(n), stats

    x = np.zeros(n)
    r = b.copy()
    z = Minv(r)
    p = z.copy()
    rz = float(r @ z)
    if rz <= 0.0:
        raise IndefiniteMatrixError(f"Preconditioner is not positive definite (rᵀz = {rz:.3e})")
    stats.residual_history.append(1.0)
    rel = 1.0

    for k in range(1, cfg.max_iterations + 1):
        Ap = A(p)
        curvature = float(p @ Ap)
        if curvature <= 0.0:
            raise IndefiniteMatrixError(f"Non-positive curvature pᵀAp = {curvature:.3e} at iteration {k}")
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * Ap
        rel = float(np.linalg.norm(r)) / bnorm
        stats.iterations = k
        stats.residual_history.append(rel)
        log_iteration(logger, "PCG", k, rel)
        if rel <= cfg.tolerance:
            stats.converged = True
            break
        z = Minv(r)
        rz_new = float(r @ z)
        if rz_new <= 0.0:
            raise IndefiniteMatrixError(f"Preconditioner is not positive definite (rᵀz = {rz_new:.3e})")
        p = z + (rz_new / rz) * p
        rz = rz_new

    stats.final_residual = rel
    if not stats.converged:
        logger.debug(f"PCG stopped after {stats.iterations} iterations at residual {rel:.3e}")
    return x, stats
