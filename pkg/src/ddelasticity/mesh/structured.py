"""
Structured rectangular meshes of bilinear quadrilaterals and their box partitions.

Node (i, j) sits at (i*h, j*h) and has index ``j*(nx+1) + i``. Element (ex, ey)
has index ``ey*nx + ex`` and lists its nodes counter-clockwise from the
bottom-left corner. Displacement dof ``2*node + c`` holds component c.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Tuple

import numpy as np

from ..utils.exceptions import BoundaryConditionError, MeshError, PartitionError

EXTENT_RTOL = 1e-9


class Edge(str, Enum):
    """Sides of the rectangular domain."""
    LEFT = "left"
    RIGHT = "right"
    BOTTOM = "bottom"
    TOP = "top"

    @property
    def outward_normal(self) -> Tuple[float, float]:
        return {
            Edge.LEFT: (-1.0, 0.0),
            Edge.RIGHT: (1.0, 0.0),
            Edge.BOTTOM: (0.0, -1.0),
            Edge.TOP: (0.0, 1.0),
        }[self]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class StructuredMesh:
    """Uniform grid of ``nx × ny`` square Q1 elements of edge ``h``."""
    width: float
    height: float
    h: float
    nx: int
    ny: int
    element_nodes: np.ndarray

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def element_area(self) -> float:
        return self.h * self.h

    @property
    def element_dofs(self) -> np.ndarray:
        """(m, 8) global dofs per element, ordered (u0x, u0y, u1x, u1y, ...)."""
        nodes = self.element_nodes
        dofs = np.empty((nodes.shape[0], 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * nodes
        dofs[:, 1::2] = 2 * nodes + 1
        return dofs

    def node_index(self, i: int, j: int) -> int:
        return j * (self.nx + 1) + i

    def node_coordinates(self) -> np.ndarray:
        """(n_nodes, 2) physical coordinates."""
        jj, ii = np.divmod(np.arange(self.n_nodes), self.nx + 1)
        return np.column_stack([ii * self.h, jj * self.h])

    def element_centroids(self) -> np.ndarray:
        ey, ex = np.divmod(np.arange(self.n_elements), self.nx)
        return np.column_stack([(ex + 0.5) * self.h, (ey + 0.5) * self.h])

    def edge_nodes(self, edge: Edge) -> np.ndarray:
        """Nodes on one side of the domain, ordered by increasing coordinate."""
        edge = Edge(edge)
        if edge is Edge.LEFT:
            return np.arange(self.ny + 1) * (self.nx + 1)
        if edge is Edge.RIGHT:
            return np.arange(self.ny + 1) * (self.nx + 1) + self.nx
        if edge is Edge.BOTTOM:
            return np.arange(self.nx + 1)
        return self.ny * (self.nx + 1) + np.arange(self.nx + 1)

    def edge_length(self, edge: Edge) -> float:
        return self.height if Edge(edge) in (Edge.LEFT, Edge.RIGHT) else self.width


def _element_count(length: float, h: float, axis: str) -> int:
    ratio = length / h
    count = int(round(ratio))
    if count < 1 or abs(ratio - count) > EXTENT_RTOL * max(1.0, ratio):
        raise MeshError(
            f"Extent {length} along {axis} is not an integer multiple of h={h} (ratio {ratio:.12g})"
        )
    return count


def build_mesh(extents: Tuple[float, float], h: float) -> StructuredMesh:
    """
    Build a structured mesh over ``(0, width) × (0, height)``.

    Args:
        extents: (width, height) of the domain
        h: Element edge length

    Returns:
        StructuredMesh

    Raises:
        MeshError: If h is not positive or does not divide both extents
    """
    width, height = (float(v) for v in extents)
    if h <= 0 or width <= 0 or height <= 0:
        raise MeshError(f"Extents and h must be positive, got extents={extents}, h={h}")

    nx = _element_count(width, h, "x")
    ny = _element_count(height, h, "y")

    ey, ex = np.divmod(np.arange(nx * ny), nx)
    bottom_left = ey * (nx + 1) + ex
    element_nodes = np.column_stack([
        bottom_left,
        bottom_left + 1,
        bottom_left + nx + 2,
        bottom_left + nx + 1,
    ]).astype(np.int64)

    return StructuredMesh(
        width=width,
        height=height,
        h=float(h),
        nx=nx,
        ny=ny,
        element_nodes=_frozen(element_nodes),
    )


@dataclass(frozen=True)
class Partition:
    """Regular ``px × py`` grid of rectangular subdomains."""
    px: int
    py: int
    sub_nx: int
    sub_ny: int
    element_subdomain: np.ndarray

    @property
    def n_subdomains(self) -> int:
        return self.px * self.py

    def subdomain_elements(self, subdomain: int) -> np.ndarray:
        return np.flatnonzero(self.element_subdomain == subdomain)

    def subdomain_box(self, subdomain: int) -> Tuple[int, int, int, int]:
        """Element index range ``(ex0, ex1, ey0, ey1)`` (half-open) of a subdomain."""
        sy, sx = divmod(subdomain, self.px)
        return (sx * self.sub_nx, (sx + 1) * self.sub_nx, sy * self.sub_ny, (sy + 1) * self.sub_ny)


def partition_mesh(mesh: StructuredMesh, px: int, py: int) -> Partition:
    """
    Split a mesh into ``px × py`` non-overlapping rectangular subdomains.

    Subdomain (sx, sy) has index ``sy*px + sx``.

    Raises:
        PartitionError: If px or py does not divide the element counts
    """
    if px < 1 or py < 1:
        raise PartitionError(f"Subdomain counts must be >= 1, got px={px}, py={py}")
    if mesh.nx % px or mesh.ny % py:
        raise PartitionError(
            f"Partition {px}x{py} does not divide the {mesh.nx}x{mesh.ny} element grid"
        )

    sub_nx, sub_ny = mesh.nx // px, mesh.ny // py
    ey, ex = np.divmod(np.arange(mesh.n_elements), mesh.nx)
    element_subdomain = (ey // sub_ny) * px + ex // sub_nx

    return Partition(
        px=px,
        py=py,
        sub_nx=sub_nx,
        sub_ny=sub_ny,
        element_subdomain=_frozen(element_subdomain.astype(np.int64)),
    )


def square_most_grid(n_subdomains: int, width: float = 2.0, height: float = 1.0) -> Tuple[int, int]:
    """
    Factor N into ``px × py`` as square as possible, longer factor along the longer side.

    4 → (2, 2), 16 → (4, 4), 8 → (4, 2).
    """
    if n_subdomains < 1:
        raise PartitionError(f"Number of subdomains must be >= 1, got {n_subdomains}")
    small = int(np.floor(np.sqrt(n_subdomains)))
    while n_subdomains % small:
        small -= 1
    large = n_subdomains // small
    return (large, small) if width >= height else (small, large)


@dataclass(frozen=True)
class BoundarySpec:
    """Clamped (homogeneous Dirichlet) sides of the domain."""
    clamped_edges: Tuple[Edge, ...]

    @classmethod
    def clamped(cls, edges: Iterable) -> "BoundarySpec":
        return cls(clamped_edges=tuple(Edge(e) for e in edges))

    def dirichlet_nodes(self, mesh: StructuredMesh) -> np.ndarray:
        if not self.clamped_edges:
            raise BoundaryConditionError(
                "Dirichlet set is empty; the elasticity operator would be singular"
            )
        return np.unique(np.concatenate([mesh.edge_nodes(e) for e in self.clamped_edges]))
