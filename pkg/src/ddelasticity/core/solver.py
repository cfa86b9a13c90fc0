"""
Decomposed elasticity solves.

The primary path runs (F)GMRES on the full block system with the
block-triangular right preconditioner

    P̃⁻¹ = [[K_II⁻¹, 0], [0, I]] · [[I, -K_IΓ], [0, I]] · [[I, 0], [0, S̃⁻¹]]

and the three-step Schur sequence is kept as a second path. Interior solves
run per subdomain through the executor.
"""
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from ..config.loader import InterfacePreconditioner, KrylovConfig, SolverConfig
from ..execution.parallel import SubdomainExecutor, get_default_executor
from ..fem.assembly import BlockSystem
from ..linalg.krylov import KrylovStats, fgmres, gmres
from ..linalg.sparse import SpdFactorization, factorize_spd
from ..utils.exceptions import AssemblyError, DimensionMismatchError, IndefiniteMatrixError, SolverError
from ..utils.logging import logger
from .interface import InterfaceNorm

solver_logger = logger.getChild("solver")

CSV_COLUMNS = (
    "h",
    "N",
    "theta",
    "precond",
    "outer_iters",
    "avg_inner_pcg",
    "subdomain_ms",
    "interface_ms",
    "converged",
    "final_residual",
)


def factorize_subdomains(
    system: BlockSystem,
    executor: Optional[SubdomainExecutor] = None,
) -> List[SpdFactorization]:
    """Factorise every ``K_{IᵢIᵢ}`` independently."""
    executor = executor or get_default_executor()
    batch = executor.map(factorize_spd, list(system.K_ii))
    solver_logger.debug(
        f"Factorised {system.n_subdomains} interior blocks "
        f"(critical path {batch.critical_path_seconds * 1e3:.2f} ms)"
    )
    return batch.results


def apply_system(
    system: BlockSystem,
    u: np.ndarray,
    executor: Optional[SubdomainExecutor] = None,
) -> np.ndarray:
    """Block matvec ``(K_II u_I + K_IΓ u_Γ ; K_ΓI u_I + K_ΓΓ u_Γ)``."""
    executor = executor or get_default_executor()
    u_i, u_g = system.split(np.asarray(u, dtype=float))

    def subdomain(i: int) -> Tuple[np.ndarray, np.ndarray]:
        return system.K_ii[i] @ u_i[i] + system.K_ig[i] @ u_g, system.K_gi[i] @ u_i[i]

    batch = executor.map(subdomain, list(range(system.n_subdomains)))
    y_g = system.K_gg @ u_g
    for _, coupling in batch.results:
        y_g = y_g + coupling
    return system.join([r[0] for r in batch.results], y_g)


def schur_matvec(
    system: BlockSystem,
    v: np.ndarray,
    factors: Optional[Sequence[SpdFactorization]] = None,
    executor: Optional[SubdomainExecutor] = None,
) -> np.ndarray:
    """``S v = K_ΓΓ v - Σᵢ K_ΓIᵢ K_IᵢIᵢ⁻¹ K_IᵢΓ v``."""
    if v.shape[0] != system.n_interface:
        raise DimensionMismatchError("interface vector", system.n_interface, v.shape[0])
    executor = executor or get_default_executor()
    factors = factors if factors is not None else factorize_subdomains(system, executor)

    def subdomain(i: int) -> np.ndarray:
        return system.K_gi[i] @ factors[i].solve(system.K_ig[i] @ v)

    batch = executor.map(subdomain, list(range(system.n_subdomains)))
    out = system.K_gg @ v
    for term in batch.results:
        out = out - term
    return out


def exact_schur_dense(
    system: BlockSystem,
    factors: Optional[Sequence[SpdFactorization]] = None,
    cap: int = 2000,
) -> np.ndarray:
    """
    Dense Schur complement from interior solves against the columns of ``K_IΓ``.

    Raises:
        AssemblyError: If n_Γ exceeds ``cap``
    """
    n_gamma = system.n_interface
    if n_gamma > cap:
        raise AssemblyError(f"Interface size {n_gamma} exceeds the dense Schur cap {cap}")
    factors = factors if factors is not None else factorize_subdomains(system)
    S = system.K_gg.toarray()
    for i in range(system.n_subdomains):
        if system.K_ii[i].shape[0] == 0:
            continue
        S -= system.K_gi[i] @ factors[i].solve(system.K_ig[i].toarray())
    return 0.5 * (S + S.T)


class BlockPreconditioner:
    """
    Right preconditioner ``P̃⁻¹`` with interchangeable interface block S̃.

    Records per-application timings: the interior solves' critical path and the
    S̃⁻¹ application time.
    """

    def __init__(
        self,
        system: BlockSystem,
        kind: InterfacePreconditioner,
        factors: Sequence[SpdFactorization],
        interface_norm: Optional[InterfaceNorm] = None,
        schur_factor: Optional[Tuple[np.ndarray, bool]] = None,
        executor: Optional[SubdomainExecutor] = None,
    ):
        self.system = system
        self.kind = InterfacePreconditioner(kind)
        self.factors = list(factors)
        self.interface_norm = interface_norm
        self.schur_factor = schur_factor
        self.executor = executor or get_default_executor()
        self.subdomain_seconds: List[float] = []
        self.interface_seconds: List[float] = []

        if system.n_interface and self.kind is InterfacePreconditioner.HNORM and interface_norm is None:
            raise SolverError("The hnorm interface preconditioner needs an InterfaceNorm")
        if system.n_interface and self.kind is InterfacePreconditioner.EXACT_SCHUR and schur_factor is None:
            raise SolverError("The exact-schur interface preconditioner needs a factorised Schur complement")

    def apply_interface(self, v_g: np.ndarray) -> np.ndarray:
        """``S̃⁻¹ v_Γ``."""
        if v_g.shape[0] == 0 or self.kind is InterfacePreconditioner.IDENTITY:
            return np.array(v_g, dtype=float, copy=True)
        if self.kind is InterfacePreconditioner.EXACT_SCHUR:
            return scipy.linalg.cho_solve(self.schur_factor, v_g)
        return self.interface_norm.apply(v_g)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v_i, v_g = self.system.split(np.asarray(v, dtype=float))

        start = time.perf_counter()
        w_g = self.apply_interface(v_g)
        self.interface_seconds.append(time.perf_counter() - start)

        def interior(i: int) -> np.ndarray:
            return self.factors[i].solve(v_i[i] - self.system.K_ig[i] @ w_g)

        batch = self.executor.map(interior, list(range(self.system.n_subdomains)))
        self.subdomain_seconds.append(batch.critical_path_seconds)
        return self.system.join(batch.results, w_g)

    __call__ = apply


def factorize_schur(S: np.ndarray) -> Tuple[np.ndarray, bool]:
    try:
        return scipy.linalg.cho_factor(S)
    except np.linalg.LinAlgError as e:
        raise IndefiniteMatrixError(f"Schur complement is not positive definite: {e}") from e


def build_block_preconditioner(
    system: BlockSystem,
    kind: InterfacePreconditioner,
    cfg: Optional[SolverConfig] = None,
    interface_norm: Optional[InterfaceNorm] = None,
    factors: Optional[Sequence[SpdFactorization]] = None,
    executor: Optional[SubdomainExecutor] = None,
) -> BlockPreconditioner:
    """Factorise the interior blocks (and S for exact-schur) and wrap them as ``P̃⁻¹``."""
    cfg = cfg or SolverConfig()
    kind = InterfacePreconditioner(kind)
    executor = executor or get_default_executor()
    factors = factors if factors is not None else factorize_subdomains(system, executor)
    schur_factor = None
    if kind is InterfacePreconditioner.EXACT_SCHUR and system.n_interface:
        schur_factor = factorize_schur(exact_schur_dense(system, factors, cfg.schur_oracle_cap))
    return BlockPreconditioner(system, kind, factors, interface_norm, schur_factor, executor)


def apply_block_preconditioner(bp: BlockPreconditioner, v: np.ndarray) -> np.ndarray:
    """``w_Γ = S̃⁻¹ v_Γ``, then ``w_I = K_II⁻¹ (v_I - K_IΓ w_Γ)``."""
    return bp.apply(v)


@dataclass
class SolveReport:
    """Outcome and instrumentation of one decomposed solve."""
    stats: KrylovStats
    u: np.ndarray
    precond: InterfacePreconditioner
    method: str = "global"
    h: float = math.nan
    n_subdomains: int = 0
    theta: Optional[float] = None
    n_faces: int = 0
    subdomain_seconds: float = 0.0
    interface_seconds: float = 0.0
    face_apply_seconds: float = 0.0
    preconditioner_applications: int = 0
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def outer_iterations(self) -> int:
        return self.stats.iterations

    @property
    def converged(self) -> bool:
        return self.stats.converged

    @property
    def avg_inner_pcg(self) -> float:
        """Average PCG iterations per Laplacian solve."""
        return self.stats.average_inner_iterations

    @property
    def pcg_per_application(self) -> float:
        """PCG iterations spent in one application of S̃⁻¹."""
        if not self.preconditioner_applications:
            return 0.0
        return self.stats.inner_iteration_total / self.preconditioner_applications

    def to_csv_row(self) -> Dict[str, Any]:
        return {
            "h": self.h,
            "N": self.n_subdomains,
            "theta": "" if self.theta is None else self.theta,
            "precond": self.precond.value,
            "outer_iters": self.outer_iterations,
            "avg_inner_pcg": round(self.avg_inner_pcg, 3),
            "subdomain_ms": round(self.subdomain_seconds * 1e3, 6),
            "interface_ms": round(self.interface_seconds * 1e3, 6),
            "converged": self.converged,
            "final_residual": self.stats.final_residual,
        }


def _krylov_for(kind: InterfacePreconditioner):
    return fgmres if kind is InterfacePreconditioner.HNORM else gmres


def _krylov_config(cfg: SolverConfig, tolerance: Optional[float]) -> KrylovConfig:
    if tolerance is None:
        return cfg.krylov
    return cfg.krylov.model_copy(update={"tolerance": tolerance})


def _record_interface_counters(report: SolveReport, interface_norm: Optional[InterfaceNorm]) -> bool:
    if interface_norm is None or report.precond is not InterfacePreconditioner.HNORM:
        return False
    report.stats.inner_iterations = list(interface_norm.pcg_iterations)
    report.stats.inner_iteration_total = int(sum(interface_norm.pcg_iterations))
    report.preconditioner_applications = interface_norm.applications
    report.face_apply_seconds = interface_norm.face_preconditioner.mean_apply_seconds
    report.n_faces = interface_norm.n_faces
    report.theta = interface_norm.cfg.theta
    return True


def _finish_report(
    report: SolveReport,
    bp: BlockPreconditioner,
    interface_norm: Optional[InterfaceNorm],
) -> SolveReport:
    report.subdomain_seconds = float(np.mean(bp.subdomain_seconds)) if bp.subdomain_seconds else 0.0
    report.interface_seconds = float(np.mean(bp.interface_seconds)) if bp.interface_seconds else 0.0
    if not _record_interface_counters(report, interface_norm):
        report.preconditioner_applications = len(bp.interface_seconds)
    return report


def solve_global(
    system: BlockSystem,
    precond: InterfacePreconditioner,
    cfg: Optional[SolverConfig] = None,
    interface_norm: Optional[InterfaceNorm] = None,
    executor: Optional[SubdomainExecutor] = None,
    tolerance: Optional[float] = None,
    factors: Optional[Sequence[SpdFactorization]] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """
    Solve ``K u = f`` with right-preconditioned (F)GMRES and ``P̃⁻¹``.

    FGMRES is used for the hnorm interface block (its inner solves vary),
    GMRES otherwise. Non-convergence is flagged in the report.

    Args:
        system: Assembled block system with load
        precond: Interface block S̃
        cfg: Solver settings
        interface_norm: Fractional norm machinery (required for hnorm)
        executor: Worker pool for subdomain work
        tolerance: Overrides ``cfg.krylov.tolerance``
        factors: Reuse existing interior factorisations

    Returns:
        (u in reduced numbering, SolveReport)
    """
    cfg = cfg or SolverConfig()
    precond = InterfacePreconditioner(precond)
    executor = executor or get_default_executor()

    setup_start = time.perf_counter()
    if interface_norm is not None:
        interface_norm.reset_counters()
    bp = build_block_preconditioner(system, precond, cfg, interface_norm, factors, executor)
    setup_seconds = time.perf_counter() - setup_start

    krylov = _krylov_for(precond)
    solve_start = time.perf_counter()
    u, stats = krylov(lambda x: apply_system(system, x, executor), system.rhs(), bp.apply,
                      _krylov_config(cfg, tolerance))
    report = SolveReport(
        stats=stats,
        u=u,
        precond=precond,
        method="global",
        n_subdomains=system.n_subdomains,
        setup_seconds=setup_seconds,
        solve_seconds=time.perf_counter() - solve_start,
    )
    _finish_report(report, bp, interface_norm)
    solver_logger.info(
        f"{krylov.__name__} with S̃={precond.value}: {stats.iterations} iterations, "
        f"residual {stats.final_residual:.2e}, converged={stats.converged}"
    )
    return u, report


def solve_schur_sequence(
    system: BlockSystem,
    precond: InterfacePreconditioner,
    cfg: Optional[SolverConfig] = None,
    interface_norm: Optional[InterfaceNorm] = None,
    executor: Optional[SubdomainExecutor] = None,
    tolerance: Optional[float] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """
    Three-step substructuring solve.

    1. ``K_IᵢIᵢ u⁽¹⁾_Iᵢ = f_Iᵢ`` for every subdomain.
    2. ``S u_Γ = f_Γ - Σ K_ΓIᵢ u⁽¹⁾_Iᵢ`` by (F)GMRES preconditioned with S̃⁻¹.
    3. ``K_IᵢIᵢ u⁽²⁾_Iᵢ = -K_IᵢΓ u_Γ``; ``u_I = u⁽¹⁾_I + u⁽²⁾_I``.
    """
    cfg = cfg or SolverConfig()
    precond = InterfacePreconditioner(precond)
    executor = executor or get_default_executor()
    if interface_norm is not None:
        interface_norm.reset_counters()

    setup_start = time.perf_counter()
    bp = build_block_preconditioner(system, precond, cfg, interface_norm, None, executor)
    setup_seconds = time.perf_counter() - setup_start
    factors = bp.factors
    indices = list(range(system.n_subdomains))

    step1 = executor.map(lambda i: factors[i].solve(system.f_i[i]), indices)
    g = np.array(system.f_gamma, dtype=float, copy=True)
    for i, u1 in enumerate(step1.results):
        g -= system.K_gi[i] @ u1

    solve_start = time.perf_counter()
    if system.n_interface:
        krylov = _krylov_for(precond)
        u_g, stats = krylov(lambda v: schur_matvec(system, v, factors, executor), g, bp.apply_interface,
                            _krylov_config(cfg, tolerance))
    else:
        u_g, stats = np.zeros(0), KrylovStats(converged=True, final_residual=0.0, residual_history=[0.0])

    step3 = executor.map(lambda i: factors[i].solve(-(system.K_ig[i] @ u_g)), indices)
    u_i = [a + b for a, b in zip(step1.results, step3.results)]
    u = system.join(u_i, u_g)

    report = SolveReport(
        stats=stats,
        u=u,
        precond=precond,
        method="schur",
        n_subdomains=system.n_subdomains,
        setup_seconds=setup_seconds,
        solve_seconds=time.perf_counter() - solve_start,
    )
    report.subdomain_seconds = max(step1.critical_path_seconds, step3.critical_path_seconds)
    _record_interface_counters(report, interface_norm)
    solver_logger.info(
        f"Schur sequence with S̃={precond.value}: {stats.iterations} iterations, converged={stats.converged}"
    )
    return u, report


def solve_monolithic(system: BlockSystem) -> np.ndarray:
    """Sparse direct solve of the reassembled system (reference solution)."""
    K = system.global_matrix().tocsc()
    if K.shape[0] == 0:
        return np.zeros(0)
    return np.atleast_1d(spla.spsolve(K, system.rhs()))


def relative_error(u: np.ndarray, reference: np.ndarray) -> float:
    """``‖u - u_ref‖ / ‖u_ref‖`` (absolute when the reference vanishes)."""
    if u.shape != reference.shape:
        raise DimensionMismatchError("solution vectors", reference.shape, u.shape)
    scale = float(np.linalg.norm(reference))
    diff = float(np.linalg.norm(u - reference))
    return diff / scale if scale > 0.0 else diff
