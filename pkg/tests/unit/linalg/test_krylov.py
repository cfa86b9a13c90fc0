"""
Unit tests for GMRES, flexible GMRES and preconditioned CG.
"""
import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import aslinearoperator

from ddelasticity.config.loader import KrylovConfig
from ddelasticity.linalg.krylov import KrylovStats, as_operator, fgmres, gmres, pcg
from ddelasticity.utils.exceptions import IndefiniteMatrixError

pytestmark = pytest.mark.unit


@pytest.fixture
def tight() -> KrylovConfig:
    return KrylovConfig(tolerance=1e-10, max_iterations=200)


@pytest.fixture
def nonsymmetric(rng) -> np.ndarray:
    """Well-conditioned 20×20 nonsymmetric matrix."""
    return 4.0 * np.eye(20) + rng.standard_normal((20, 20)) / np.sqrt(20)


class TestGmres:

    def test_identity_one_iteration(self, rng, tight):
        b = rng.standard_normal(10)
        x, stats = gmres(np.eye(10), b, cfg=tight)

        assert stats.iterations == 1
        assert stats.converged
        np.testing.assert_allclose(x, b)

    def test_minimal_polynomial_degree_two(self, rng, tight):
        A = np.eye(8)
        A[0, 1] = 1.0
        b = rng.standard_normal(8)
        x, stats = gmres(A, b, cfg=tight)

        assert stats.iterations <= 2
        np.testing.assert_allclose(A @ x, b, atol=1e-10)

    def test_dense_oracle(self, nonsymmetric, rng):
        b = rng.standard_normal(20)
        x, stats = gmres(nonsymmetric, b, cfg=KrylovConfig(tolerance=1e-6))

        assert stats.converged
        assert stats.final_residual <= 1e-6
        reference = np.linalg.solve(nonsymmetric, b)
        assert np.linalg.norm(x - reference) <= 1e-5 * np.linalg.norm(reference)

    def test_residual_history_monotone(self, nonsymmetric, rng, tight):
        _, stats = gmres(nonsymmetric, rng.standard_normal(20), cfg=tight)

        history = np.array(stats.residual_history)
        assert history[0] == 1.0
        assert len(history) == stats.iterations + 1
        assert np.all(np.diff(history) <= 1e-14)

    def test_right_preconditioning_with_exact_inverse(self, nonsymmetric, rng, tight):
        b = rng.standard_normal(20)
        inverse = np.linalg.inv(nonsymmetric)
        x, stats = gmres(nonsymmetric, b, inverse, tight)

        assert stats.iterations == 1
        np.testing.assert_allclose(nonsymmetric @ x, b, atol=1e-9)

    def test_restart(self, nonsymmetric, rng):
        b = rng.standard_normal(20)
        x, stats = gmres(nonsymmetric, b, cfg=KrylovConfig(tolerance=1e-8, restart=4, max_iterations=400))

        assert stats.converged
        assert np.linalg.norm(nonsymmetric @ x - b) <= 1e-8 * np.linalg.norm(b)

    def test_non_convergence_is_flagged(self, laplacian_1d, rng):
        A = laplacian_1d(50)
        x, stats = gmres(A, rng.standard_normal(50), cfg=KrylovConfig(tolerance=1e-10, max_iterations=3))

        assert not stats.converged
        assert stats.iterations == 3
        assert stats.final_residual > 1e-10
        assert x.shape == (50,)

    def test_zero_rhs(self):
        x, stats = gmres(np.eye(3), np.zeros(3))

        assert stats.converged
        assert stats.iterations == 0
        assert not np.any(x)

    def test_keep_basis(self, nonsymmetric, rng):
        _, stats = gmres(nonsymmetric, rng.standard_normal(20), cfg=KrylovConfig(tolerance=1e-8, keep_basis=True))

        V = stats.basis
        assert V is not None
        np.testing.assert_allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-10)


class TestFgmres:

    def test_fixed_preconditioner_matches_gmres(self, nonsymmetric, rng, tight):
        b = rng.standard_normal(20)
        jacobi = 1.0 / np.diag(nonsymmetric)

        x_g, stats_g = gmres(nonsymmetric, b, lambda v: jacobi * v, tight)
        x_f, stats_f = fgmres(nonsymmetric, b, lambda v: jacobi * v, tight)

        assert stats_f.iterations == stats_g.iterations
        np.testing.assert_allclose(x_f, x_g, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(stats_f.residual_history, stats_g.residual_history, rtol=1e-10, atol=1e-14)

    def test_exact_inverse_one_iteration(self, nonsymmetric, rng, tight):
        inverse = np.linalg.inv(nonsymmetric)
        _, stats = fgmres(nonsymmetric, rng.standard_normal(20), lambda v: inverse @ v, tight)
        assert stats.iterations == 1

    def test_perturbed_inverse(self, random_spd, rng):
        A = random_spd(30)
        inverse = np.linalg.inv(A)

        def noisy(v):
            z = inverse @ v
            return z + 1e-8 * np.linalg.norm(z) * rng.standard_normal(30) / np.sqrt(30)

        b = rng.standard_normal(30)
        x, stats = fgmres(A, b, noisy, KrylovConfig(tolerance=1e-10))

        assert stats.converged
        assert stats.iterations <= 3
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


class TestPcg:

    def test_identity(self, rng, tight):
        _, stats = pcg(np.eye(7), rng.standard_normal(7), cfg=tight)
        assert stats.iterations == 1

    def test_laplacian_finite_termination(self, laplacian_1d, rng, tight):
        A = laplacian_1d(10)
        b = rng.standard_normal(10)
        x, stats = pcg(A, b, lambda r: r / 2.0, tight)

        assert stats.converged
        assert stats.iterations <= 10
        np.testing.assert_allclose(A @ x, b, atol=1e-9)

    def test_exact_preconditioner(self, laplacian_1d, rng, tight):
        A = laplacian_1d(12)
        inverse = np.linalg.inv(A)
        _, stats = pcg(A, rng.standard_normal(12), lambda r: inverse @ r, tight)
        assert stats.iterations == 1

    def test_sparse_and_linear_operator_inputs(self, laplacian_1d, rng, tight):
        A = sp.csr_matrix(laplacian_1d(15))
        b = rng.standard_normal(15)
        x_sparse, _ = pcg(A, b, cfg=tight)
        x_op, _ = pcg(aslinearoperator(A), b, cfg=tight)
        np.testing.assert_allclose(x_sparse, x_op, rtol=1e-12)

    def test_indefinite_operator(self):
        with pytest.raises(IndefiniteMatrixError):
            pcg(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))

    def test_indefinite_preconditioner(self):
        with pytest.raises(IndefiniteMatrixError):
            pcg(np.eye(2), np.ones(2), lambda r: -r)


class TestKrylovStats:

    def test_average_inner_iterations(self):
        stats = KrylovStats(inner_iteration_total=12, inner_iterations=[2, 4, 6])
        assert stats.average_inner_iterations == 4.0
        assert KrylovStats().average_inner_iterations == 0.0

    def test_residual_rows(self):
        stats = KrylovStats(residual_history=[1.0, 0.1, 0.01])
        assert stats.residual_rows() == [(0, 1.0), (1, 0.1), (2, 0.01)]

    def test_as_operator_rejects_non_operators(self):
        with pytest.raises(TypeError):
            as_operator("matrix")
