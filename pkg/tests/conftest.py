"""
Shared pytest fixtures for ddelasticity tests.

Provides:
- Small structured meshes and partitions
- A factory for fully set-up cantilever problems
- Solver configurations with exact or Lanczos interface norms
- A seeded random generator
"""
from typing import Callable, Optional

import numpy as np
import pytest

from ddelasticity.config.loader import (
    FractionalNormConfig,
    InterfacePreconditioner,
    KrylovConfig,
    LanczosMode,
    ProblemConfig,
    SolverConfig,
)
from ddelasticity.core.problem import DecomposedProblem, build_problem
from ddelasticity.fem.material import MaterialSpec
from ddelasticity.mesh.dofs import classify_dofs, interface_topology
from ddelasticity.mesh.structured import BoundarySpec, Edge, build_mesh, partition_mesh


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test sees the same random data."""
    return np.random.default_rng(20240611)


@pytest.fixture
def material() -> MaterialSpec:
    return MaterialSpec(youngs_modulus=1.0, poisson_ratio=0.3)


@pytest.fixture
def clamp_right() -> BoundarySpec:
    return BoundarySpec.clamped([Edge.RIGHT])


@pytest.fixture
def mesh_4x2():
    """4×2 elements on (0,2)×(0,1)."""
    return build_mesh((2.0, 1.0), 0.5)


@pytest.fixture
def split_4x2(mesh_4x2, clamp_right):
    """4×2 mesh in 2×1 subdomains with the right edge clamped: (mesh, partition, dofmap, topology)."""
    partition = partition_mesh(mesh_4x2, 2, 1)
    dofmap = classify_dofs(mesh_4x2, partition, clamp_right)
    return mesh_4x2, partition, dofmap, interface_topology(partition, dofmap)


@pytest.fixture
def make_problem() -> Callable[..., DecomposedProblem]:
    """Factory: ``make_problem(h, domains, px=None, py=None)``."""

    def factory(h: float, domains: int = 4, px: Optional[int] = None, py: Optional[int] = None):
        cfg = ProblemConfig(h=h, domains=domains, px=px, py=py)
        return build_problem(cfg)

    return factory


@pytest.fixture
def problem_h8(make_problem) -> DecomposedProblem:
    """h=1/8 cantilever in 2×2 subdomains."""
    return make_problem(1 / 8, 4)


@pytest.fixture
def dense_norm_config() -> FractionalNormConfig:
    """Exact fractional norm from the full generalised eigendecomposition."""
    return FractionalNormConfig(theta=0.5, mode=LanczosMode.DENSE)


@pytest.fixture
def make_solver_config() -> Callable[..., SolverConfig]:
    """Factory: ``make_solver_config(precond, tol=1e-8, mode=inverse, theta=0.5)``."""

    def factory(
        precond: InterfacePreconditioner = InterfacePreconditioner.HNORM,
        tol: float = 1e-8,
        mode: LanczosMode = LanczosMode.INVERSE,
        theta: float = 0.5,
        max_iterations: int = 500,
    ) -> SolverConfig:
        return SolverConfig(
            precond=precond,
            krylov=KrylovConfig(tolerance=tol, max_iterations=max_iterations),
            interface=FractionalNormConfig(theta=theta, mode=mode),
        )

    return factory


@pytest.fixture
def laplacian_1d() -> Callable[[int], np.ndarray]:
    """Dense tridiag(-1, 2, -1) of a given size."""
    return lambda n: 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)


@pytest.fixture
def random_spd(rng) -> Callable[[int], np.ndarray]:
    """Well-conditioned random SPD matrices from the seeded generator."""

    def factory(n: int) -> np.ndarray:
        A = rng.standard_normal((n, n))
        return A @ A.T + n * np.eye(n)

    return factory
