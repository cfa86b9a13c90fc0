"""Structured meshes, box partitions and dof classification."""
from .dofs import DIRICHLET, INTERFACE, DofMap, Face, InterfaceTopology, classify_dofs, interface_topology
from .structured import (
    BoundarySpec,
    Edge,
    Partition,
    StructuredMesh,
    build_mesh,
    partition_mesh,
    square_most_grid,
)

__all__ = [
    "BoundarySpec",
    "DIRICHLET",
    "DofMap",
    "Edge",
    "Face",
    "INTERFACE",
    "InterfaceTopology",
    "Partition",
    "StructuredMesh",
    "build_mesh",
    "classify_dofs",
    "interface_topology",
    "partition_mesh",
    "square_most_grid",
]
