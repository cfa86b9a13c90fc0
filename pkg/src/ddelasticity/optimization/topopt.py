"""
Variable Thickness Sheet compliance minimisation.

    min fᵀu  s.t.  K(ρ)u = f,  Σ ρₑ·areaₑ ≤ V,  ρ̲ ≤ ρₑ ≤ ρ̄

Each fixed-point step solves the elasticity problem with the decomposed
solver, evaluates the self-adjoint sensitivities and applies an Optimality
Criteria update whose volume multiplier is found by bisection.
"""
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..config.loader import AdaptiveToleranceConfig, InterfacePreconditioner, OcConfig, ProblemConfig, SolverConfig
from ..core.problem import DecomposedProblem, build_problem
from ..execution.parallel import SubdomainExecutor
from ..fem.assembly import compliance, element_stiffness
from ..utils.exceptions import ConvergenceError, DimensionMismatchError, OptimizationError
from ..utils.logging import logger

VOLUME_ATOL = 1e-9
MAX_BRACKET_STEPS = 200
EPS = 1e-30

topopt_logger = logger.getChild("topopt")


@dataclass(frozen=True)
class DensityField:
    """Element densities with box bounds and a volume budget."""
    values: np.ndarray
    rho_min: float
    rho_max: float
    volume_budget: float
    element_area: float

    @classmethod
    def uniform(cls, n_elements: int, element_area: float, cfg: OcConfig) -> "DensityField":
        """Budget ``V = vf·m·ρ̄·area``; start at ``cfg.initial_density`` or ``V/(m·area)``."""
        budget = cfg.volume_fraction * n_elements * cfg.rho_max * element_area
        start = cfg.initial_density if cfg.initial_density is not None else budget / (n_elements * element_area)
        start = float(np.clip(start, cfg.rho_min, cfg.rho_max))
        return cls(np.full(n_elements, start), cfg.rho_min, cfg.rho_max, budget, element_area)

    @property
    def volume(self) -> float:
        return float(self.values.sum() * self.element_area)

    def with_values(self, values: np.ndarray) -> "DensityField":
        if values.shape != self.values.shape:
            raise DimensionMismatchError("density values", self.values.shape, values.shape)
        return replace(self, values=values)

    def is_feasible(self, atol: float = VOLUME_ATOL) -> bool:
        in_box = bool(np.all(self.values >= self.rho_min) and np.all(self.values <= self.rho_max))
        return in_box and self.volume <= self.volume_budget + atol


def sensitivity(u: np.ndarray, element_matrix: np.ndarray, element_dofs: np.ndarray) -> np.ndarray:
    """
    Compliance sensitivities ``∂(fᵀu)/∂ρₑ = -uₑᵀ Kₑ uₑ``.

    Args:
        u: Displacements over all dofs (zeros at clamped dofs)
        element_matrix: Unit-density element stiffness
        element_dofs: (m, 8) global dofs per element
    """
    ue = np.asarray(u, dtype=float)[element_dofs]
    return -np.einsum("ni,ij,nj->n", ue, element_matrix, ue)


def oc_update(density: DensityField, sens: np.ndarray, cfg: OcConfig) -> DensityField:
    """
    Optimality Criteria update with move limits and volume bisection.

    ``ρ' = clamp(ρ·(-s/(λ·area))^η, [max(ρ̲, ρ-m), min(ρ̄, ρ+m)])``; the
    multiplier λ is bisected until the relative bracket width is below
    ``cfg.bisection_tolerance`` and the feasible end is returned.

    Raises:
        OptimizationError: On all-zero sensitivities, an unreachable budget or
            a non-monotone volume during bisection
    """
    rho = density.values
    sens = np.asarray(sens, dtype=float)
    if sens.shape != rho.shape:
        raise DimensionMismatchError("sensitivities", rho.shape, sens.shape)
    demand = np.maximum(-sens, 0.0)
    if not np.any(demand > 0.0):
        raise OptimizationError("All sensitivities vanish; the volume multiplier cannot be bracketed")

    lower = np.maximum(density.rho_min, rho - cfg.move_limit)
    upper = np.minimum(density.rho_max, rho + cfg.move_limit)
    area = density.element_area
    budget = density.volume_budget

    def candidate(lam: float) -> np.ndarray:
        return np.clip(rho * (demand / (lam * area)) ** cfg.damping, lower, upper)

    def volume(values: np.ndarray) -> float:
        return float(values.sum() * area)

    # λ → 0: every loaded element goes to its upper clamp
    relaxed = np.where(demand > 0.0, upper, lower)
    if volume(relaxed) <= budget + VOLUME_ATOL:
        return density.with_values(relaxed)
    if volume(lower) > budget + VOLUME_ATOL:
        raise OptimizationError(
            f"Volume budget {budget:.6g} is below the smallest reachable volume {volume(lower):.6g}"
        )
    # only the lower clamp fits, up to the volume tolerance
    if volume(lower) >= budget:
        return density.with_values(lower)

    scale = float(np.mean(demand[demand > 0.0])) / area
    lo, hi = scale, scale
    for _ in range(MAX_BRACKET_STEPS):
        if volume(candidate(hi)) <= budget:
            break
        hi *= 2.0
    else:
        raise OptimizationError("Could not bracket the volume multiplier from above")
    for _ in range(MAX_BRACKET_STEPS):
        if volume(candidate(lo)) > budget:
            break
        lo *= 0.5
    else:
        raise OptimizationError("Could not bracket the volume multiplier from below")

    vol_lo, vol_hi = volume(candidate(lo)), volume(candidate(hi))
    while hi - lo > cfg.bisection_tolerance * hi:
        mid = 0.5 * (lo + hi)
        vol_mid = volume(candidate(mid))
        if not vol_hi - VOLUME_ATOL <= vol_mid <= vol_lo + VOLUME_ATOL:
            raise OptimizationError(f"Volume is not monotone in the multiplier at λ={mid:.6e}")
        if vol_mid > budget:
            lo, vol_lo = mid, vol_mid
        else:
            hi, vol_hi = mid, vol_mid

    return density.with_values(candidate(hi))


def adaptive_tolerance(history: Sequence[float], cfg: Optional[AdaptiveToleranceConfig] = None) -> float:
    """
    GMRES tolerance from the last two compliance values.

    ``clamp(|c_k - c_{k-1}| / max(|c_k|, ε) · s, [tol_min, tol_max])``;
    ``tol_max`` until two values are known.
    """
    cfg = cfg or AdaptiveToleranceConfig()
    if len(history) < 2:
        return cfg.tol_max
    current, previous = float(history[-1]), float(history[-2])
    change = abs(current - previous) / max(abs(current), EPS)
    return float(np.clip(change * cfg.scale, cfg.tol_min, cfg.tol_max))


@dataclass
class TopOptReport:
    """Per-step history of one optimisation run."""
    density: DensityField
    compliance: List[float] = field(default_factory=list)
    gmres_iterations: List[int] = field(default_factory=list)
    tolerances: List[float] = field(default_factory=list)
    volumes: List[float] = field(default_factory=list)
    changes: List[float] = field(default_factory=list)
    inner_pcg: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.compliance)

    @property
    def average_gmres(self) -> float:
        if not self.gmres_iterations:
            return 0.0
        return sum(self.gmres_iterations) / len(self.gmres_iterations)

    def table_cell(self) -> str:
        """Fixed-point count with the bracketed average GMRES count, e.g. ``10 (10)``."""
        return f"{self.iterations} ({self.average_gmres:.0f})"

    def rows(self) -> List[dict]:
        return [
            {
                "iteration": k + 1,
                "compliance": self.compliance[k],
                "gmres_iterations": self.gmres_iterations[k],
                "tolerance": self.tolerances[k],
                "volume": self.volumes[k],
                "change": self.changes[k],
                "avg_inner_pcg": self.inner_pcg[k],
            }
            for k in range(self.iterations)
        ]


StepCallback = Callable[[int, DensityField, np.ndarray], None]


def run_topopt(
    problem_cfg: ProblemConfig,
    oc_cfg: Optional[OcConfig] = None,
    solver_cfg: Optional[SolverConfig] = None,
    executor: Optional[SubdomainExecutor] = None,
    problem: Optional[DecomposedProblem] = None,
    on_step: Optional[StepCallback] = None,
) -> TopOptReport:
    """
    FEA → OC update → convergence check, until the max-norm density change is
    below ``oc_cfg.change_tolerance`` or the iteration cap is hit.

    Args:
        problem_cfg: Cantilever definition
        oc_cfg: Density update settings
        solver_cfg: Decomposed solver settings (S̃ choice, Krylov, adaptive tolerance)
        executor: Worker pool for subdomain work
        problem: Pre-built problem (built from ``problem_cfg`` if None)
        on_step: Called with (iteration, updated density, displacements) after each step

    Raises:
        ConvergenceError: If an FEA solve fails; carries the partial report
    """
    oc_cfg = oc_cfg or OcConfig()
    solver_cfg = solver_cfg or SolverConfig()
    problem = problem or build_problem(problem_cfg, executor)
    mesh = problem.mesh

    norm = None
    if solver_cfg.precond is InterfacePreconditioner.HNORM:
        norm = problem.interface_norm(solver_cfg.interface)
    Ke = element_stiffness(mesh.h, problem_cfg.material)
    element_dofs = mesh.element_dofs
    f = problem.load

    density = DensityField.uniform(mesh.n_elements, mesh.element_area, oc_cfg)
    report = TopOptReport(density=density)
    adaptive = solver_cfg.adaptive_tolerance

    for step in range(1, oc_cfg.max_iterations + 1):
        if adaptive.enabled:
            tol = adaptive_tolerance(report.compliance, adaptive)
        else:
            tol = solver_cfg.krylov.tolerance
        u, solve_report = problem.solve(solver_cfg, density.values, norm, tolerance=tol)
        if not solve_report.converged:
            raise ConvergenceError(
                f"FEA at fixed-point step {step} did not converge "
                f"(residual {solve_report.stats.final_residual:.3e})",
                stats=solve_report.stats,
                report=report,
            )

        c = compliance(u, f)
        if report.compliance:
            previous = report.compliance[-1]
            if c > previous + 10.0 * tol * abs(previous):
                topopt_logger.warning(f"Compliance rose from {previous:.6e} to {c:.6e} at step {step}")

        u_global = problem.dofmap.to_global(u)
        updated = oc_update(density, sensitivity(u_global, Ke, element_dofs), oc_cfg)
        change = float(np.max(np.abs(updated.values - density.values)))

        report.compliance.append(c)
        report.gmres_iterations.append(solve_report.outer_iterations)
        report.tolerances.append(tol)
        report.volumes.append(updated.volume)
        report.changes.append(change)
        report.inner_pcg.append(solve_report.avg_inner_pcg)
        report.density = updated
        density = updated

        topopt_logger.info(
            f"Step {step}: compliance {c:.6e}, GMRES {solve_report.outer_iterations} (tol {tol:.1e}), "
            f"volume {updated.volume:.6g}/{updated.volume_budget:.6g}, change {change:.3e}"
        )
        if on_step is not None:
            on_step(step, updated, u_global)
        if change <= oc_cfg.change_tolerance:
            report.converged = True
            break

    if not report.converged:
        topopt_logger.warning(f"Stopped at the iteration cap {oc_cfg.max_iterations} without converging")
    return report
