"""Material laws, Q1 elasticity assembly and interface trace matrices."""
from .assembly import (
    BlockSystem,
    TractionSpec,
    assemble_load,
    assemble_load_vector,
    assemble_monolithic,
    assemble_system,
    compliance,
    constitutive_matrix,
    element_stiffness,
    strain_displacement,
)
from .material import MaterialSpec, PlaneModel, lame_constants
from .trace import TraceMatrices, assemble_trace_matrices, interface_edges

__all__ = [
    "BlockSystem",
    "MaterialSpec",
    "PlaneModel",
    "TraceMatrices",
    "TractionSpec",
    "assemble_load",
    "assemble_load_vector",
    "assemble_monolithic",
    "assemble_system",
    "assemble_trace_matrices",
    "compliance",
    "constitutive_matrix",
    "element_stiffness",
    "interface_edges",
    "lame_constants",
    "strain_displacement",
]
