"""
Unit tests for sensitivities, the Optimality Criteria update and the fixed-point loop.
"""
import numpy as np
import pytest

from ddelasticity.config.loader import (
    AdaptiveToleranceConfig,
    InterfacePreconditioner,
    KrylovConfig,
    LanczosMode,
    OcConfig,
    ProblemConfig,
    SolverConfig,
)
from ddelasticity.core.solver import solve_monolithic
from ddelasticity.fem.assembly import compliance, element_stiffness
from ddelasticity.optimization.topopt import (
    DensityField,
    TopOptReport,
    adaptive_tolerance,
    oc_update,
    run_topopt,
    sensitivity,
)
from ddelasticity.utils.exceptions import ConvergenceError, DimensionMismatchError, OptimizationError

pytestmark = pytest.mark.unit


def _field(values, budget, rho_min=1e-3, rho_max=1.0, area=1.0):
    return DensityField(np.asarray(values, dtype=float), rho_min, rho_max, budget, area)


@pytest.fixture
def fast_solver() -> SolverConfig:
    """Exact Schur complement, fixed tolerance."""
    return SolverConfig(
        precond=InterfacePreconditioner.EXACT_SCHUR,
        krylov=KrylovConfig(tolerance=1e-10),
        adaptive_tolerance=AdaptiveToleranceConfig(enabled=False),
    )


class TestSensitivity:

    def test_zero_displacement(self, material):
        Ke = element_stiffness(1.0, material)
        dofs = np.arange(8).reshape(1, 8)
        assert not np.any(sensitivity(np.zeros(8), Ke, dofs))

    def test_single_element_equals_negative_work(self, material, rng):
        Ke = element_stiffness(1.0, material)
        u = rng.standard_normal(8)
        f = Ke @ u
        s = sensitivity(u, Ke, np.arange(8).reshape(1, 8))
        assert s[0] == pytest.approx(-(f @ u), rel=1e-12)

    def test_non_positive(self, problem_h8, material, rng):
        u = rng.standard_normal(2 * problem_h8.mesh.n_nodes)
        s = sensitivity(u, element_stiffness(problem_h8.h, material), problem_h8.mesh.element_dofs)
        assert np.all(s <= 1e-14)

    def test_finite_difference(self, make_problem, rng):
        problem = make_problem(0.25, domains=1)
        rho = rng.uniform(0.5, 1.0, problem.mesh.n_elements)
        f = problem.load

        def c(density):
            return compliance(solve_monolithic(problem.assemble(density)), f)

        u = problem.dofmap.to_global(solve_monolithic(problem.assemble(rho)))
        s = sensitivity(u, element_stiffness(problem.h, problem.config.material), problem.mesh.element_dofs)

        delta = 1e-4
        for e in (0, 5, problem.mesh.n_elements - 1):
            up, down = rho.copy(), rho.copy()
            up[e] += delta
            down[e] -= delta
            fd = (c(up) - c(down)) / (2.0 * delta)
            assert fd == pytest.approx(s[e], rel=1e-5, abs=1e-8)


class TestOcUpdate:

    def test_uniform_sensitivities_keep_uniform_design(self):
        density = _field(np.full(8, 0.5), budget=4.0)
        updated = oc_update(density, np.full(8, -2.0), OcConfig())

        np.testing.assert_allclose(updated.values, 0.5, rtol=1e-5)
        assert updated.volume <= density.volume_budget + 1e-9
        assert updated.is_feasible()

    def test_dominant_element_hits_move_limit(self):
        sens = np.full(8, -1.0)
        sens[3] = -1000.0
        updated = oc_update(_field(np.full(8, 0.5), budget=4.0), sens, OcConfig(move_limit=0.2))

        assert updated.values[3] == pytest.approx(0.7)
        assert np.all(np.delete(updated.values, 3) < 0.5)
        assert updated.volume <= 4.0 + 1e-9

    def test_small_move_limit_bounds_change(self, rng):
        density = _field(np.full(16, 0.5), budget=8.0)
        sens = -rng.uniform(0.1, 10.0, 16)
        updated = oc_update(density, sens, OcConfig(move_limit=1e-3))
        assert np.max(np.abs(updated.values - density.values)) <= 1e-3 + 1e-12

    def test_box_bounds(self, rng):
        values = rng.uniform(0.01, 1.0, 32)
        budget = 0.95 * values.sum()
        density = _field(values, budget=budget, rho_min=0.01)
        updated = oc_update(density, -rng.uniform(0.1, 5.0, 32), OcConfig())

        assert np.all(updated.values >= 0.01)
        assert np.all(updated.values <= 1.0)
        assert updated.volume <= budget + 1e-9

    def test_slack_budget_moves_to_upper_clamp(self):
        updated = oc_update(_field(np.full(4, 0.5), budget=10.0), np.full(4, -1.0), OcConfig(move_limit=0.2))
        np.testing.assert_allclose(updated.values, 0.7)

    def test_optimal_design_is_fixed_point(self):
        """Interior elements balance the multiplier, the others sit on their bounds."""
        density = _field([0.01, 1.0, 0.5, 0.5], budget=2.01, rho_min=0.01)
        sens = np.array([-1e-4, -100.0, -1.0, -1.0])
        updated = oc_update(density, sens, OcConfig(move_limit=0.2, bisection_tolerance=1e-8))

        np.testing.assert_allclose(updated.values, density.values, rtol=1e-6)
        assert updated.is_feasible()

    def test_lower_clamp_within_volume_tolerance(self):
        density = _field(np.full(4, 0.5), budget=4 * (0.5 - 0.2) - 5e-10)
        updated = oc_update(density, np.full(4, -1.0), OcConfig(move_limit=0.2))

        np.testing.assert_allclose(updated.values, 0.3)
        assert updated.is_feasible()

    def test_vanishing_sensitivities(self):
        with pytest.raises(OptimizationError):
            oc_update(_field(np.full(4, 0.5), budget=2.0), np.zeros(4), OcConfig())

    def test_unreachable_budget(self):
        with pytest.raises(OptimizationError):
            oc_update(_field(np.full(4, 0.5), budget=0.01, rho_min=0.1), np.full(4, -1.0), OcConfig())

    def test_shape_checked(self):
        with pytest.raises(DimensionMismatchError):
            oc_update(_field(np.full(4, 0.5), budget=2.0), np.ones(3), OcConfig())


class TestDensityField:

    def test_uniform_start_at_volume_fraction(self):
        density = DensityField.uniform(10, 0.25, OcConfig(volume_fraction=0.4))

        np.testing.assert_allclose(density.values, 0.4)
        assert density.volume_budget == pytest.approx(1.0)
        assert density.volume == pytest.approx(1.0)

    def test_explicit_initial_density(self):
        density = DensityField.uniform(4, 1.0, OcConfig(initial_density=0.3))
        np.testing.assert_allclose(density.values, 0.3)

    def test_feasibility(self):
        assert _field([0.5, 0.5], budget=1.0).is_feasible()
        assert not _field([0.5, 0.6], budget=1.0).is_feasible()
        assert not _field([0.0, 0.5], budget=1.0).is_feasible()


class TestAdaptiveTolerance:

    def test_loose_until_two_values(self):
        cfg = AdaptiveToleranceConfig()
        assert adaptive_tolerance([], cfg) == cfg.tol_max
        assert adaptive_tolerance([3.0], cfg) == cfg.tol_max

    def test_stagnation_gives_tightest(self):
        assert adaptive_tolerance([2.0, 2.0]) == 1e-8

    def test_large_change_gives_loosest(self):
        assert adaptive_tolerance([100.0, 99.0]) == 1e-4

    def test_proportional_in_between(self):
        assert adaptive_tolerance([1.0, 1.0 + 1e-5]) == pytest.approx(1e-6, rel=1e-4)


class TestTopOptReport:

    def test_table_cell(self):
        report = TopOptReport(density=_field([0.5], budget=1.0), compliance=[3.0, 2.0, 1.0],
                              gmres_iterations=[4, 5, 6])
        assert report.iterations == 3
        assert report.table_cell() == "3 (5)"

    def test_empty(self):
        report = TopOptReport(density=_field([0.5], budget=1.0))
        assert report.average_gmres == 0.0
        assert report.rows() == []


class TestRunTopopt:

    def test_compliance_decreases_and_volume_respected(self, fast_solver):
        problem_cfg = ProblemConfig(h=1 / 8, domains=4)
        oc_cfg = OcConfig(max_iterations=8, change_tolerance=1e-3)
        report = run_topopt(problem_cfg, oc_cfg, fast_solver)

        assert report.iterations >= 2
        assert report.compliance[-1] < report.compliance[0]
        assert all(v <= report.density.volume_budget + 1e-9 for v in report.volumes)
        assert report.density.is_feasible()
        assert len(report.rows()) == report.iterations

    def test_full_budget_converges_immediately(self, fast_solver):
        oc_cfg = OcConfig(volume_fraction=1.0, initial_density=1.0)
        report = run_topopt(ProblemConfig(h=0.25, domains=4), oc_cfg, fast_solver)

        assert report.converged
        assert report.iterations == 1
        assert report.changes == [0.0]

    def test_hnorm_with_adaptive_tolerance(self):
        solver_cfg = SolverConfig(
            precond=InterfacePreconditioner.HNORM,
            interface={"mode": LanczosMode.DENSE},
        )
        report = run_topopt(ProblemConfig(h=0.25, domains=4), OcConfig(max_iterations=3), solver_cfg)

        assert report.tolerances[0] == solver_cfg.adaptive_tolerance.tol_max
        assert all(1e-8 <= t <= 1e-4 for t in report.tolerances)
        assert all(k >= 1 for k in report.gmres_iterations)

    def test_callback_per_step(self, fast_solver):
        seen = []
        report = run_topopt(
            ProblemConfig(h=0.25, domains=4),
            OcConfig(max_iterations=3, change_tolerance=1e-12),
            fast_solver,
            on_step=lambda k, density, u: seen.append((k, density.volume, u.shape)),
        )

        assert [k for k, _, _ in seen] == list(range(1, report.iterations + 1))
        assert report.iterations == 3
        assert not report.converged

    def test_failed_solve_carries_partial_report(self):
        solver_cfg = SolverConfig(
            precond=InterfacePreconditioner.IDENTITY,
            krylov=KrylovConfig(tolerance=1e-12, max_iterations=1),
            adaptive_tolerance=AdaptiveToleranceConfig(enabled=False),
        )
        with pytest.raises(ConvergenceError) as excinfo:
            run_topopt(ProblemConfig(h=0.25, domains=4), OcConfig(), solver_cfg)

        assert isinstance(excinfo.value.report, TopOptReport)
        assert excinfo.value.report.iterations == 0
