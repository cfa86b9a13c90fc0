"""
Mass and Laplacian matrices of one displacement component on the interface Γ.

Γ is discretised by the mesh edges shared by elements of two different
subdomains, carrying 1D linear elements. Rows and columns of Dirichlet nodes
are deleted after assembly, which imposes Dirichlet conditions where Γ meets
the clamped boundary and natural conditions elsewhere.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..mesh.dofs import DIRICHLET, DofMap, InterfaceTopology
from ..mesh.structured import Partition, StructuredMesh
from ..utils.exceptions import AssemblyError, PartitionError
from ..utils.logging import logger

_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
_STIFFNESS = np.array([[1.0, -1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class TraceMatrices:
    """Scalar trace mass ``M`` (SPD) and Laplacian ``L`` on the interface nodes."""
    M: sp.csr_matrix
    L: sp.csr_matrix
    n_components: int
    floating_components: int

    @property
    def size(self) -> int:
        return int(self.M.shape[0])

    @property
    def has_dirichlet_contact(self) -> bool:
        """True when every connected piece of Γ touches the clamped boundary (L is SPD)."""
        return self.floating_components == 0

    def effective_laplacian(self, shift: float) -> sp.csr_matrix:
        """``L`` when SPD, otherwise ``L + shift·M``."""
        if self.has_dirichlet_contact:
            return self.L
        return sp.csr_matrix(self.L + shift * self.M)


def interface_edges(mesh: StructuredMesh, partition: Partition) -> np.ndarray:
    """(e, 2) node pairs of mesh edges separating elements of different subdomains."""
    sub = partition.element_subdomain.reshape(mesh.ny, mesh.nx)
    stride = mesh.nx + 1

    # vertical edges at node column ex between element columns ex-1 and ex
    ey, ex = np.nonzero(sub[:, 1:] != sub[:, :-1])
    ex = ex + 1
    vertical = np.column_stack([ey * stride + ex, (ey + 1) * stride + ex])

    # horizontal edges at node row ey between element rows ey-1 and ey
    ey, ex = np.nonzero(sub[1:, :] != sub[:-1, :])
    ey = ey + 1
    horizontal = np.column_stack([ey * stride + ex, ey * stride + ex + 1])

    return np.vstack([vertical, horizontal]).astype(np.int64)


def assemble_trace_matrices(
    topology: InterfaceTopology,
    dofmap: DofMap,
    mesh: StructuredMesh,
    partition: Partition,
) -> TraceMatrices:
    """
    Assemble ``M`` and ``L`` over every interface edge, cross points included.

    ``M_e = h/6 [[2, 1], [1, 2]]`` and ``L_e = 1/h [[1, -1], [-1, 1]]``.

    Raises:
        AssemblyError: If the interface is empty
    """
    if dofmap.n_interface_nodes == 0:
        raise AssemblyError("Interface is empty; no trace matrices to assemble")
    if topology.n_faces == 0 and topology.n_cross_points == 0:
        raise AssemblyError("Interface topology has neither faces nor cross points")
    if partition.element_subdomain.shape[0] != mesh.n_elements:
        raise PartitionError("Partition was built for a different mesh")

    position = np.full(dofmap.n_nodes, -1, dtype=np.int64)
    position[dofmap.interface_nodes] = np.arange(dofmap.n_interface_nodes)

    edges = interface_edges(mesh, partition)
    local = position[edges]
    on_gamma = (local >= 0) | (dofmap.node_class[edges] == DIRICHLET)
    if not np.all(on_gamma):
        raise AssemblyError("Interface edge with an endpoint that is neither interface nor Dirichlet")

    h = mesh.h
    rows = np.repeat(local, 2, axis=1).ravel()
    cols = np.tile(local, (1, 2)).ravel()
    mass = np.tile((h * _MASS).ravel(), edges.shape[0])
    stiff = np.tile((_STIFFNESS / h).ravel(), edges.shape[0])
    keep = (rows >= 0) & (cols >= 0)

    n = dofmap.n_interface_nodes
    M = sp.csr_matrix((mass[keep], (rows[keep], cols[keep])), shape=(n, n))
    L = sp.csr_matrix((stiff[keep], (rows[keep], cols[keep])), shape=(n, n))
    for A in (M, L):
        A.sum_duplicates()
        A.sort_indices()

    # a connected piece of Γ is floating when none of its edges reaches a Dirichlet node
    n_components, labels = connected_components(M, directed=False)
    clamped_edge = np.any(local < 0, axis=1)
    anchor = local[clamped_edge]
    anchored = set(labels[anchor[anchor >= 0]].tolist())
    floating = n_components - len(anchored)

    if floating:
        logger.getChild("assembly").warning(
            f"{floating} of {n_components} interface pieces do not touch the clamped boundary; "
            "the trace Laplacian is singular there"
        )
    return TraceMatrices(M=M, L=L, n_components=n_components, floating_components=floating)
