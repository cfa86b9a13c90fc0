"""
Interface preconditioner S̃ = Ĥ_θ: component-wise fractional norm on Γ.

For one displacement component ``H̃_θ = M(M⁻¹L)^{1-θ}``; its inverse is applied
by projecting the pencil (L, M) onto a small Krylov space (inverse Lanczos by
default), with inner PCG solves for L preconditioned face by face.
"""
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..config.loader import FractionalNormConfig, KrylovConfig, LanczosMode, NormVariant
from ..execution.parallel import SubdomainExecutor, get_default_executor
from ..fem.trace import TraceMatrices
from ..linalg.krylov import KrylovStats, pcg
from ..linalg.sparse import (
    DensePencil,
    SpdFactorization,
    dense_sym_gen_eig,
    factorize_spd,
    fractional_weights,
)
from ..mesh.dofs import InterfaceTopology
from ..utils.exceptions import (
    DimensionMismatchError,
    IndefiniteMatrixError,
    NonPositiveSpectrumError,
    PreconditionerError,
)
from ..utils.logging import logger

# relative size of the M-norm below which a new Lanczos direction counts as breakdown
LANCZOS_BREAKDOWN_RTOL = 1e-10
FACE_SHIFT = 1e-10
COMPONENTS = 2

Solve = Callable[[np.ndarray], np.ndarray]


@dataclass
class FacePreconditioner:
    """
    Block-diagonal approximation of L: one Cholesky factor per face, Jacobi at cross points.
    """
    size: int
    face_positions: Tuple[np.ndarray, ...]
    face_factors: Tuple[SpdFactorization, ...]
    cross_positions: np.ndarray
    cross_inverse_diagonal: np.ndarray
    apply_seconds: List[float] = field(default_factory=list)

    @property
    def n_blocks(self) -> int:
        return len(self.face_factors) + int(self.cross_positions.size)

    @property
    def mean_apply_seconds(self) -> float:
        return float(np.mean(self.apply_seconds)) if self.apply_seconds else 0.0

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.shape[0] != self.size:
            raise DimensionMismatchError("face preconditioner input", self.size, v.shape[0])
        start = time.perf_counter()
        z = np.zeros_like(v, dtype=float)
        for positions, factor in zip(self.face_positions, self.face_factors):
            z[positions] = factor.solve(v[positions])
        z[self.cross_positions] = self.cross_inverse_diagonal * v[self.cross_positions]
        self.apply_seconds.append(time.perf_counter() - start)
        return z


def _factorize_face(block: sp.csr_matrix) -> SpdFactorization:
    """Cholesky of one face block, shifted slightly when it is singular."""
    row_sums = np.abs(np.asarray(block.sum(axis=1)).ravel())
    diag = block.diagonal()
    scale = float(diag.max()) if diag.size else 1.0
    if row_sums.max(initial=0.0) > 1e-12 * scale:
        try:
            return factorize_spd(block)
        except IndefiniteMatrixError:
            pass
    shift = FACE_SHIFT * float(diag.sum()) / max(block.shape[0], 1)
    logger.getChild("interface").warning(
        f"Face block of size {block.shape[0]} is singular; adding shift {shift:.3e}"
    )
    return factorize_spd(block + shift * sp.identity(block.shape[0], format="csr"))


def build_face_preconditioner(
    L: sp.spmatrix,
    topology: InterfaceTopology,
    executor: Optional[SubdomainExecutor] = None,
) -> FacePreconditioner:
    """
    Restrict L to each face (cross-point rows/columns removed) and factorise.

    Each face block is built independently; cross points are scaled by 1/L_jj.
    """
    L = sp.csr_matrix(L)
    executor = executor or get_default_executor()
    positions = [np.asarray(face.positions) for face in topology.faces]
    batch = executor.map(lambda p: _factorize_face(L[p][:, p]), positions)

    cross = np.asarray(topology.cross_point_positions, dtype=np.int64)
    diag = L.diagonal()[cross]
    if np.any(diag <= 0.0):
        raise IndefiniteMatrixError("Laplacian has a non-positive diagonal entry at a cross point")

    covered = sum(p.size for p in positions) + cross.size
    if covered != L.shape[0]:
        raise DimensionMismatchError("faces plus cross points", L.shape[0], covered)

    return FacePreconditioner(
        size=L.shape[0],
        face_positions=tuple(positions),
        face_factors=tuple(batch.results),
        cross_positions=cross,
        cross_inverse_diagonal=1.0 / diag,
    )


def laplacian_solve(
    L: sp.spmatrix,
    fp: FacePreconditioner,
    v: np.ndarray,
    cfg: Optional[FractionalNormConfig] = None,
) -> Tuple[np.ndarray, KrylovStats]:
    """PCG solve ``L x = v`` to the inner tolerance with the face preconditioner."""
    cfg = cfg or FractionalNormConfig()
    inner = KrylovConfig(tolerance=cfg.inner_pcg_tolerance, max_iterations=cfg.inner_pcg_max_iterations)
    x, stats = pcg(L, v, fp.apply, inner)
    if not stats.converged:
        logger.getChild("interface").debug(
            f"Inner PCG stopped at residual {stats.final_residual:.3e} after {stats.iterations} iterations"
        )
    return x, stats


@dataclass(frozen=True)
class LanczosBasis:
    """M-orthonormal Krylov basis W with projections ``A_k = WᵀLW``, ``B_k = WᵀMW``."""
    W: np.ndarray
    A_k: np.ndarray
    B_k: np.ndarray
    breakdown: bool

    @property
    def k(self) -> int:
        return self.W.shape[1]


def lanczos_pencil(
    M: sp.spmatrix,
    L: sp.spmatrix,
    v: np.ndarray,
    k: int,
    L_solve: Optional[Solve] = None,
    M_solve: Optional[Solve] = None,
    mode: LanczosMode = LanczosMode.INVERSE,
) -> LanczosBasis:
    """
    Lanczos process for the pencil (L, M) in the M-inner product, seeded with ``M⁻¹v``.

    ``inverse`` mode iterates with ``L⁻¹M`` (one Laplacian solve per step) and
    resolves the low end of the spectrum; ``truncated`` mode iterates with
    ``M⁻¹L``. Every new direction is M-orthogonalised against the whole basis
    twice. Early breakdown returns the smaller, invariant basis.

    Args:
        M: Trace mass matrix (SPD)
        L: Trace Laplacian (SPD)
        v: Seed vector (nonzero)
        k: Maximum basis size
        L_solve: Approximate ``L⁻¹`` (exact factorisation if None)
        M_solve: ``M⁻¹`` (exact factorisation if None)
        mode: inverse or truncated
    """
    n = M.shape[0]
    if v.shape[0] != n:
        raise DimensionMismatchError("Lanczos seed", n, v.shape[0])
    k = max(1, min(int(k), n))
    if M_solve is None:
        M_solve = factorize_spd(M).solve
    if mode is LanczosMode.INVERSE and L_solve is None:
        L_solve = factorize_spd(L).solve

    def step(w: np.ndarray) -> np.ndarray:
        if mode is LanczosMode.INVERSE:
            return L_solve(M @ w)
        return M_solve(L @ w)

    W = np.zeros((n, k))
    q = M_solve(np.asarray(v, dtype=float))
    norm = float(np.sqrt(max(q @ (M @ q), 0.0)))
    if norm == 0.0:
        raise PreconditionerError("Lanczos seed must be nonzero")
    W[:, 0] = q / norm

    used, breakdown = 1, False
    for j in range(1, k):
        u = step(W[:, j - 1])
        reference = float(np.sqrt(max(u @ (M @ u), 0.0)))
        for _ in range(2):
            u -= W[:, :j] @ (W[:, :j].T @ (M @ u))
        beta = float(np.sqrt(max(u @ (M @ u), 0.0)))
        if beta <= LANCZOS_BREAKDOWN_RTOL * max(reference, 1e-300):
            breakdown = True
            break
        W[:, j] = u / beta
        used = j + 1

    W = W[:, :used]
    MW = M @ W
    LW = L @ W
    A_k = W.T @ LW
    B_k = W.T @ MW
    return LanczosBasis(W=W, A_k=0.5 * (A_k + A_k.T), B_k=0.5 * (B_k + B_k.T), breakdown=breakdown)


def ritz_fractional_inverse(
    basis: LanczosBasis,
    v: np.ndarray,
    theta: float,
    variant: NormVariant = NormVariant.REDUCED,
) -> np.ndarray:
    """
    ``z = W Y Θ^{θ-1} Yᵀ Wᵀ v`` from the Ritz pairs of ``(A_k, B_k)``.

    Raises:
        NonPositiveSpectrumError: If a Ritz value is not positive
    """
    ritz, Y = dense_sym_gen_eig(basis.A_k, basis.B_k)
    if ritz[0] <= 0.0:
        raise NonPositiveSpectrumError(float(ritz[0]), "Ritz value of the trace pencil")
    weights = fractional_weights(ritz, theta, -1, NormVariant(variant).value)
    WY = basis.W @ Y
    return WY @ (weights * (WY.T @ v))


def apply_fractional_inverse(
    M: sp.spmatrix,
    L: sp.spmatrix,
    cfg: FractionalNormConfig,
    fp: Optional[FacePreconditioner],
    v: np.ndarray,
) -> np.ndarray:
    """
    One-off ``H̃_θ⁻¹ v`` for a single component.

    Dense-oracle mode uses the full generalised eigendecomposition; the Lanczos
    modes use ``cfg.lanczos_vectors`` basis vectors with PCG Laplacian solves
    preconditioned by ``fp`` (exact factorisation when ``fp`` is None).
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != M.shape[0]:
        raise DimensionMismatchError("interface component", M.shape[0], v.shape[0])
    if not np.any(v):
        return np.zeros_like(v)
    if cfg.mode is LanczosMode.DENSE:
        return DensePencil(M, L).apply(cfg.theta, v, power_sign=-1, variant=cfg.variant.value)

    L_solve = None
    if fp is not None:
        L_solve = lambda r: laplacian_solve(L, fp, r, cfg)[0]  # noqa: E731
    basis = lanczos_pencil(M, L, v, cfg.lanczos_vectors, L_solve=L_solve, mode=cfg.mode)
    return ritz_fractional_inverse(basis, v, cfg.theta, cfg.variant)


class InterfaceNorm:
    """
    Component-wise ``Ĥ_θ = H̃_θ ⊕ H̃_θ`` with cached factorisations and counters.

    The pencil uses ``L + σM`` when some piece of Γ floats free of the clamped
    boundary.
    """

    def __init__(
        self,
        trace: TraceMatrices,
        topology: InterfaceTopology,
        cfg: Optional[FractionalNormConfig] = None,
        executor: Optional[SubdomainExecutor] = None,
    ):
        self.cfg = cfg or FractionalNormConfig()
        self.logger = logger.getChild("interface")
        self.trace = trace
        self.M = trace.M
        self.L = trace.effective_laplacian(self.cfg.floating_shift)
        if not trace.has_dirichlet_contact:
            self.logger.warning(
                f"Interface floats free of the clamped boundary; using L + {self.cfg.floating_shift}·M"
            )
        self.n_faces = topology.n_faces
        self._M_factor = factorize_spd(self.M)
        self.face_preconditioner = build_face_preconditioner(self.L, topology, executor)
        self._dense: Optional[DensePencil] = None

        self.applications = 0
        self.pcg_iterations: List[int] = []

    @property
    def size(self) -> int:
        """Scalar interface node count n_Γ^s."""
        return int(self.M.shape[0])

    @property
    def dense_pencil(self) -> DensePencil:
        if self._dense is None:
            self._dense = DensePencil(self.M, self.L)
        return self._dense

    def reset_counters(self) -> None:
        self.applications = 0
        self.pcg_iterations = []
        self.face_preconditioner.apply_seconds.clear()

    def _laplacian_solve(self, r: np.ndarray) -> np.ndarray:
        x, stats = laplacian_solve(self.L, self.face_preconditioner, r, self.cfg)
        self.pcg_iterations.append(stats.iterations)
        return x

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        """``H̃_θ⁻¹ v`` for one displacement component."""
        if v.shape[0] != self.size:
            raise DimensionMismatchError("interface component", self.size, v.shape[0])
        if not np.any(v):
            return np.zeros(self.size)
        cfg = self.cfg
        if cfg.mode is LanczosMode.DENSE:
            return self.dense_pencil.apply(cfg.theta, v, power_sign=-1, variant=cfg.variant.value)
        basis = lanczos_pencil(
            self.M,
            self.L,
            v,
            cfg.lanczos_vectors,
            L_solve=self._laplacian_solve,
            M_solve=self._M_factor.solve,
            mode=cfg.mode,
        )
        return ritz_fractional_inverse(basis, v, cfg.theta, cfg.variant)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``Ĥ_θ⁻¹ v`` for a full interface vector (both components)."""
        z = apply_interface_preconditioner(self, v)
        self.applications += 1
        return z


def apply_interface_preconditioner(norm: InterfaceNorm, v: np.ndarray) -> np.ndarray:
    """
    Apply the fractional inverse to each component block of an interface vector.

    Raises:
        DimensionMismatchError: If the length is not ``2 · n_Γ^s``
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] % COMPONENTS:
        raise DimensionMismatchError("interface vector length divisible by 2", "even", v.shape[0])
    if v.shape[0] != COMPONENTS * norm.size:
        raise DimensionMismatchError("interface vector", COMPONENTS * norm.size, v.shape[0])
    ns = norm.size
    return np.concatenate([norm.apply_inverse(v[c * ns:(c + 1) * ns]) for c in range(COMPONENTS)])
