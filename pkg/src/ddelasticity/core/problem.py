"""
Cantilever set-up: mesh, partition, dof classification, loads and interface data.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..config.loader import (
    FractionalNormConfig,
    InterfacePreconditioner,
    ProblemConfig,
    SolverConfig,
)
from ..execution.parallel import SubdomainExecutor, get_default_executor
from ..fem.assembly import BlockSystem, assemble_load, assemble_system
from ..fem.trace import TraceMatrices, assemble_trace_matrices
from ..mesh.dofs import DofMap, InterfaceTopology, classify_dofs, interface_topology
from ..mesh.structured import BoundarySpec, Partition, StructuredMesh, build_mesh, partition_mesh
from ..utils.logging import logger
from .interface import InterfaceNorm
from .solver import SolveReport, solve_global


@dataclass
class DecomposedProblem:
    """Everything about one (h, px, py) configuration that does not depend on the density."""
    config: ProblemConfig
    mesh: StructuredMesh
    partition: Partition
    bc: BoundarySpec
    dofmap: DofMap
    topology: InterfaceTopology
    f_i: List[np.ndarray]
    f_gamma: np.ndarray
    executor: SubdomainExecutor = field(default_factory=get_default_executor)
    _trace: Optional[TraceMatrices] = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return self.mesh.h

    @property
    def n_subdomains(self) -> int:
        return self.partition.n_subdomains

    @property
    def load(self) -> np.ndarray:
        """Reduced load vector ``f = (f_I ; f_Γ)``."""
        return np.concatenate(self.f_i + [self.f_gamma])

    @property
    def trace(self) -> TraceMatrices:
        if self._trace is None:
            self._trace = assemble_trace_matrices(self.topology, self.dofmap, self.mesh, self.partition)
        return self._trace

    def assemble(self, density: Optional[np.ndarray] = None) -> BlockSystem:
        return assemble_system(
            self.mesh,
            self.partition,
            self.dofmap,
            self.config.material,
            density=density,
            load=(self.f_i, self.f_gamma),
            executor=self.executor,
        )

    def interface_norm(self, cfg: Optional[FractionalNormConfig] = None) -> Optional[InterfaceNorm]:
        """Fractional norm on Γ, or None when there is no interface."""
        if self.dofmap.n_interface_nodes == 0:
            return None
        return InterfaceNorm(self.trace, self.topology, cfg, self.executor)

    def solve(
        self,
        cfg: SolverConfig,
        density: Optional[np.ndarray] = None,
        interface_norm: Optional[InterfaceNorm] = None,
        tolerance: Optional[float] = None,
    ) -> Tuple[np.ndarray, SolveReport]:
        """Assemble K(ρ) and run the decomposed solve; the report carries h and θ."""
        system = self.assemble(density)
        if interface_norm is None and cfg.precond is InterfacePreconditioner.HNORM:
            interface_norm = self.interface_norm(cfg.interface)
        u, report = solve_global(
            system, cfg.precond, cfg, interface_norm, self.executor, tolerance=tolerance
        )
        report.h = self.h
        report.n_faces = self.topology.n_faces
        if cfg.precond is InterfacePreconditioner.HNORM:
            report.theta = cfg.interface.theta
        return u, report


def build_problem(
    config: ProblemConfig,
    executor: Optional[SubdomainExecutor] = None,
) -> DecomposedProblem:
    """
    Build the cantilever of ``config``: clamped edges, body force and tractions.

    Raises:
        MeshError: From mesh, partition or boundary construction
    """
    mesh = build_mesh(config.extents, config.h)
    px, py = config.grid()
    partition = partition_mesh(mesh, px, py)
    bc = config.load.boundary_spec()
    dofmap = classify_dofs(mesh, partition, bc)
    topology = interface_topology(partition, dofmap)
    f_i, f_gamma = assemble_load(mesh, dofmap, config.load.body_force, config.load.tractions, bc)

    logger.getChild("problem").info(
        f"Mesh {mesh.nx}x{mesh.ny} (h={mesh.h:g}), {px}x{py} subdomains, "
        f"n_I={dofmap.n_interior}, n_Γ={dofmap.n_interface}, "
        f"{topology.n_faces} faces, {topology.n_cross_points} cross points"
    )
    return DecomposedProblem(
        config=config,
        mesh=mesh,
        partition=partition,
        bc=bc,
        dofmap=dofmap,
        topology=topology,
        f_i=f_i,
        f_gamma=f_gamma,
        executor=executor or get_default_executor(),
    )
