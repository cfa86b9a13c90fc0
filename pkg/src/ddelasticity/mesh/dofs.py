"""
Degree-of-freedom classification and interface topology.

Reduced numbering: interior dofs of subdomain 0, 1, ..., N-1 (each block
contiguous, ascending global dof inside a block), then the interface dofs
component-blocked: x-components of all interface nodes, then y-components,
each in ascending node order. Dirichlet dofs are eliminated.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..utils.exceptions import BoundaryConditionError, DimensionMismatchError, PartitionError
from .structured import BoundarySpec, Partition, StructuredMesh, _frozen

INTERFACE = -1
DIRICHLET = -2


@dataclass(frozen=True)
class DofMap:
    """Classification of nodes/dofs and the interior-first reduced numbering."""
    n_nodes: int
    n_subdomains: int
    node_class: np.ndarray
    node_subdomain_count: np.ndarray
    node_subdomain_pair: np.ndarray
    dof_to_reduced: np.ndarray
    reduced_to_dof: np.ndarray
    interior_offsets: np.ndarray
    interface_nodes: np.ndarray

    @property
    def n_interior(self) -> int:
        return int(self.interior_offsets[-1])

    @property
    def n_interface_nodes(self) -> int:
        return int(self.interface_nodes.size)

    @property
    def n_interface(self) -> int:
        return 2 * self.n_interface_nodes

    @property
    def n(self) -> int:
        return self.n_interior + self.n_interface

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_class == DIRICHLET)

    def interior_slice(self, subdomain: int) -> slice:
        return slice(int(self.interior_offsets[subdomain]), int(self.interior_offsets[subdomain + 1]))

    def interior_size(self, subdomain: int) -> int:
        return int(self.interior_offsets[subdomain + 1] - self.interior_offsets[subdomain])

    def interface_component(self, component: int) -> slice:
        """Positions of one displacement component inside an interface vector."""
        ns = self.n_interface_nodes
        return slice(component * ns, (component + 1) * ns)

    def to_global(self, u_reduced: np.ndarray) -> np.ndarray:
        """Scatter a reduced vector to all ``2*n_nodes`` dofs (zeros at Dirichlet dofs)."""
        if u_reduced.shape[0] != self.n:
            raise DimensionMismatchError("reduced vector", self.n, u_reduced.shape[0])
        full = np.zeros(2 * self.n_nodes)
        full[self.reduced_to_dof] = u_reduced
        return full

    def to_reduced(self, u_global: np.ndarray) -> np.ndarray:
        if u_global.shape[0] != 2 * self.n_nodes:
            raise DimensionMismatchError("global vector", 2 * self.n_nodes, u_global.shape[0])
        return u_global[self.reduced_to_dof]


def classify_dofs(mesh: StructuredMesh, partition: Partition, bc: BoundarySpec) -> DofMap:
    """
    Classify every dof as Interior(i), Interface or Dirichlet and renumber.

    A node is on the interface iff it touches elements of two or more
    subdomains and is not clamped; clamped nodes are Dirichlet even when they
    lie geometrically on Γ.

    Raises:
        BoundaryConditionError: If the Dirichlet set is empty
        PartitionError: If the partition does not belong to the mesh
    """
    if partition.element_subdomain.shape[0] != mesh.n_elements:
        raise PartitionError("Partition was built for a different mesh")

    n_nodes = mesh.n_nodes
    dirichlet = bc.dirichlet_nodes(mesh)
    if dirichlet.size == 0:
        raise BoundaryConditionError("Dirichlet set is empty")

    # unique (node, subdomain) incidences, sorted by node then subdomain
    pairs = np.column_stack([
        mesh.element_nodes.ravel(),
        np.repeat(partition.element_subdomain, 4),
    ])
    pairs = np.unique(pairs, axis=0)
    count = np.bincount(pairs[:, 0], minlength=n_nodes)
    first = np.searchsorted(pairs[:, 0], np.arange(n_nodes))
    sub_pair = np.full((n_nodes, 2), -1, dtype=np.int64)
    sub_pair[:, 0] = pairs[first, 1]
    two = count >= 2
    sub_pair[two, 1] = pairs[first[two] + 1, 1]

    node_class = np.where(count == 1, sub_pair[:, 0], INTERFACE).astype(np.int64)
    node_class[dirichlet] = DIRICHLET

    # interior dofs grouped by subdomain
    interior_nodes = np.flatnonzero(node_class >= 0)
    interior_dofs = np.sort(np.concatenate([2 * interior_nodes, 2 * interior_nodes + 1]))
    owner = node_class[interior_dofs // 2]
    order = np.lexsort((interior_dofs, owner))
    interior_dofs = interior_dofs[order]
    sizes = np.bincount(owner, minlength=partition.n_subdomains)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    interface_nodes = np.flatnonzero(node_class == INTERFACE)
    interface_dofs = np.concatenate([2 * interface_nodes, 2 * interface_nodes + 1])

    reduced_to_dof = np.concatenate([interior_dofs, interface_dofs]).astype(np.int64)
    dof_to_reduced = np.full(2 * n_nodes, -1, dtype=np.int64)
    dof_to_reduced[reduced_to_dof] = np.arange(reduced_to_dof.size)

    return DofMap(
        n_nodes=n_nodes,
        n_subdomains=partition.n_subdomains,
        node_class=_frozen(node_class),
        node_subdomain_count=_frozen(count.astype(np.int64)),
        node_subdomain_pair=_frozen(sub_pair),
        dof_to_reduced=_frozen(dof_to_reduced),
        reduced_to_dof=_frozen(reduced_to_dof),
        interior_offsets=_frozen(offsets),
        interface_nodes=_frozen(interface_nodes.astype(np.int64)),
    )


@dataclass(frozen=True)
class Face:
    """Interface nodes shared by exactly two subdomains, ordered along the face."""
    subdomains: Tuple[int, int]
    nodes: np.ndarray
    positions: np.ndarray  # indices into DofMap.interface_nodes

    @property
    def size(self) -> int:
        return int(self.nodes.size)


@dataclass(frozen=True)
class InterfaceTopology:
    """Faces and cross points of the skeleton Γ."""
    faces: Tuple[Face, ...]
    cross_points: np.ndarray
    cross_point_positions: np.ndarray

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_cross_points(self) -> int:
        return int(self.cross_points.size)


def interface_topology(partition: Partition, dofmap: DofMap) -> InterfaceTopology:
    """
    Split the interface nodes into faces and cross points.

    Faces are keyed by the pair of subdomains sharing them. On the structured
    grid a face is a straight run along a grid line, so ascending node index
    is the geometric order along it.
    """
    if dofmap.n_subdomains != partition.n_subdomains:
        raise PartitionError("DofMap was built for a different partition")

    nodes = dofmap.interface_nodes
    counts = dofmap.node_subdomain_count[nodes]
    positions = np.arange(nodes.size)

    cross = counts > 2
    on_face = ~cross
    pairs = dofmap.node_subdomain_pair[nodes[on_face]]
    face_nodes = nodes[on_face]
    face_pos = positions[on_face]

    faces: List[Face] = []
    if face_nodes.size:
        keys, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        for k, key in enumerate(keys):
            members = np.flatnonzero(inverse == k)
            order = np.argsort(face_nodes[members], kind="stable")
            members = members[order]
            faces.append(Face(
                subdomains=(int(key[0]), int(key[1])),
                nodes=_frozen(face_nodes[members].copy()),
                positions=_frozen(face_pos[members].copy()),
            ))

    return InterfaceTopology(
        faces=tuple(faces),
        cross_points=_frozen(nodes[cross].copy()),
        cross_point_positions=_frozen(positions[cross].copy()),
    )
