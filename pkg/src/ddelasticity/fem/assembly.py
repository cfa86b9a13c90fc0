"""
Q1 plane-elasticity assembly: element matrices, the decomposed block system and loads.

Element stiffness entries follow the mesh convention: local dof ``2*a + c`` is
component c of the element's a-th node (counter-clockwise from bottom-left).
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..execution.parallel import SubdomainExecutor, get_default_executor
from ..mesh.dofs import DofMap
from ..mesh.structured import BoundarySpec, Edge, Partition, StructuredMesh, _frozen
from ..utils.exceptions import AssemblyError, BoundaryConditionError, DimensionMismatchError
from ..utils.logging import logger
from .material import MaterialSpec, lame_constants

GAUSS_POINTS = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))

# reference coordinates of the four element nodes
_NODE_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_NODE_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


class TractionSpec(BaseModel):
    """Constant surface load on (part of) one side of the domain."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    edge: Edge = Edge.LEFT
    magnitude: float = 1.0
    direction: Optional[Tuple[float, float]] = None  # None: outward normal
    start: Optional[float] = Field(default=None, ge=0.0)
    stop: Optional[float] = Field(default=None, ge=0.0)

    @field_validator("direction")
    @classmethod
    def validate_direction(cls, v):
        if v is not None and np.hypot(*v) == 0.0:
            raise ValueError("direction must be a nonzero vector")
        return v

    def vector(self) -> np.ndarray:
        """Traction vector g (force per unit length)."""
        d = np.asarray(self.direction if self.direction is not None else self.edge.outward_normal, dtype=float)
        return self.magnitude * d / np.linalg.norm(d)

    def segment(self, mesh: StructuredMesh) -> Tuple[float, float]:
        """Loaded interval measured along the edge from its first node."""
        length = mesh.edge_length(self.edge)
        start = 0.0 if self.start is None else self.start
        stop = length if self.stop is None else self.stop
        if not start < stop <= length * (1.0 + 1e-12):
            raise BoundaryConditionError(
                f"Traction segment [{start}, {stop}] does not lie on the {self.edge.value} edge of length {length}"
            )
        return start, min(stop, length)


def _shape_gradients(xi: float, eta: float) -> np.ndarray:
    """(2, 4) derivatives of the bilinear shape functions in reference coordinates."""
    return 0.25 * np.array([
        _NODE_XI * (1.0 + _NODE_ETA * eta),
        _NODE_ETA * (1.0 + _NODE_XI * xi),
    ])


def constitutive_matrix(material: MaterialSpec) -> np.ndarray:
    """3×3 D in Voigt notation with engineering shear strain."""
    mu, _ = lame_constants(material)
    lam = material.plane_lambda()
    return np.array([
        [lam + 2.0 * mu, lam, 0.0],
        [lam, lam + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ])


def strain_displacement(xi: float, eta: float, h: float) -> np.ndarray:
    """3×8 B matrix of a square element of edge h."""
    grads = _shape_gradients(xi, eta) * (2.0 / h)
    B = np.zeros((3, 8))
    B[0, 0::2] = grads[0]
    B[1, 1::2] = grads[1]
    B[2, 0::2] = grads[1]
    B[2, 1::2] = grads[0]
    return B


@lru_cache(maxsize=32)
def element_stiffness(h: float, material: MaterialSpec) -> np.ndarray:
    """
    Unit-density Q1 element stiffness ``∫ Bᵀ D B`` by 2×2 Gauss quadrature.

    Args:
        h: Element edge length
        material: Material specification

    Returns:
        Read-only symmetric 8×8 matrix
    """
    if h <= 0:
        raise AssemblyError(f"Element size must be positive, got {h}")
    D = constitutive_matrix(material)
    detJ = 0.25 * h * h
    Ke = np.zeros((8, 8))
    for xi in GAUSS_POINTS:
        for eta in GAUSS_POINTS:
            B = strain_displacement(xi, eta, h)
            Ke += B.T @ D @ B * detJ
    return _frozen(0.5 * (Ke + Ke.T))


def _element_density(mesh: StructuredMesh, density: Optional[np.ndarray]) -> np.ndarray:
    if density is None:
        return np.ones(mesh.n_elements)
    rho = np.asarray(density, dtype=float)
    if rho.shape != (mesh.n_elements,):
        raise DimensionMismatchError("density field", mesh.n_elements, rho.shape)
    if not np.all(rho > 0.0):
        raise AssemblyError(
            f"Densities must be strictly positive (min {rho.min():.3e}); K(ρ) would lose definiteness"
        )
    return rho


def _element_triplets(
    mesh: StructuredMesh,
    elements: np.ndarray,
    rho: np.ndarray,
    Ke: np.ndarray,
    dofmap: DofMap,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """COO triplets in reduced numbering with Dirichlet rows/columns dropped."""
    red = dofmap.dof_to_reduced[mesh.element_dofs[elements]]
    rows = np.repeat(red, 8, axis=1).ravel()
    cols = np.tile(red, (1, 8)).ravel()
    vals = (rho[elements][:, None] * Ke.ravel()[None, :]).ravel()
    keep = (rows >= 0) & (cols >= 0)
    return rows[keep], cols[keep], vals[keep]


@dataclass(frozen=True)
class BlockSystem:
    """
    Decomposed stiffness system in the interior-first reduced numbering.

    ``K = [[K_II, K_IΓ], [K_ΓI, K_ΓΓ]]`` with ``K_II = ⊕ K_{IᵢIᵢ}``.
    """
    K_ii: Tuple[sp.csr_matrix, ...]
    K_ig: Tuple[sp.csr_matrix, ...]
    K_gi: Tuple[sp.csr_matrix, ...]
    K_gg: sp.csr_matrix
    f_i: Tuple[np.ndarray, ...]
    f_gamma: np.ndarray

    @property
    def n_subdomains(self) -> int:
        return len(self.K_ii)

    @property
    def interior_sizes(self) -> List[int]:
        return [K.shape[0] for K in self.K_ii]

    @property
    def n_interior(self) -> int:
        return int(sum(self.interior_sizes))

    @property
    def n_interface(self) -> int:
        return int(self.K_gg.shape[0])

    @property
    def n(self) -> int:
        return self.n_interior + self.n_interface

    def split(self, u: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """Cut a full vector into per-subdomain interior parts and the interface part."""
        if u.shape[0] != self.n:
            raise DimensionMismatchError("block vector", self.n, u.shape[0])
        offsets = np.cumsum([0] + self.interior_sizes)
        parts = [u[offsets[i]:offsets[i + 1]] for i in range(self.n_subdomains)]
        return parts, u[self.n_interior:]

    def join(self, u_i: Sequence[np.ndarray], u_gamma: np.ndarray) -> np.ndarray:
        return np.concatenate(list(u_i) + [u_gamma])

    def rhs(self) -> np.ndarray:
        return self.join(self.f_i, self.f_gamma)

    def with_load(self, f_i: Sequence[np.ndarray], f_gamma: np.ndarray) -> "BlockSystem":
        """Same operator, new right-hand side."""
        if len(f_i) != self.n_subdomains:
            raise DimensionMismatchError("f_I blocks", self.n_subdomains, len(f_i))
        for i, (K, f) in enumerate(zip(self.K_ii, f_i)):
            if f.shape[0] != K.shape[0]:
                raise DimensionMismatchError(f"f_I of subdomain {i}", K.shape[0], f.shape[0])
        if f_gamma.shape[0] != self.n_interface:
            raise DimensionMismatchError("f_Γ", self.n_interface, f_gamma.shape[0])
        return BlockSystem(self.K_ii, self.K_ig, self.K_gi, self.K_gg, tuple(f_i), f_gamma)

    def global_matrix(self) -> sp.csr_matrix:
        """Reassembled ``K`` as one CSR matrix (for oracles and direct solves)."""
        n = self.n_subdomains
        blocks = [[None] * (n + 1) for _ in range(n + 1)]
        for i in range(n):
            blocks[i][i] = self.K_ii[i]
            blocks[i][n] = self.K_ig[i]
            blocks[n][i] = self.K_gi[i]
        blocks[n][n] = self.K_gg
        if self.n_interface == 0:
            return sp.block_diag(self.K_ii, format="csr")
        return sp.bmat(blocks, format="csr")


@dataclass(frozen=True)
class _SubdomainBlocks:
    K_ii: sp.csr_matrix
    K_ig: sp.csr_matrix
    K_gg: sp.csr_matrix


def assemble_system(
    mesh: StructuredMesh,
    partition: Partition,
    dofmap: DofMap,
    material: MaterialSpec,
    density: Optional[np.ndarray] = None,
    load: Optional[Tuple[Sequence[np.ndarray], np.ndarray]] = None,
    executor: Optional[SubdomainExecutor] = None,
) -> BlockSystem:
    """
    Assemble ``K(ρ) = Σ ρₑ Kₑ`` split into the blocks of the decomposition.

    Each subdomain assembles its own blocks independently; the interface
    contributions are summed into ``K_ΓΓ`` in subdomain order.

    Args:
        mesh: Structured mesh
        partition: Box partition of the mesh
        dofmap: Dof classification built from mesh and partition
        material: Material (unit density)
        density: Per-element density, uniform 1 if None
        load: (f_I per subdomain, f_Γ) from ``assemble_load``; zero if None
        executor: Worker pool for the per-subdomain assembly

    Raises:
        AssemblyError: If a density is not strictly positive
    """
    rho = _element_density(mesh, density)
    Ke = element_stiffness(mesh.h, material)
    executor = executor or get_default_executor()
    n_interior = dofmap.n_interior
    n_gamma = dofmap.n_interface

    def assemble_subdomain(i: int) -> _SubdomainBlocks:
        rows, cols, vals = _element_triplets(mesh, partition.subdomain_elements(i), rho, Ke, dofmap)
        offset, size = int(dofmap.interior_offsets[i]), dofmap.interior_size(i)
        row_int, col_int = rows < n_interior, cols < n_interior
        if np.any(row_int & ((rows < offset) | (rows >= offset + size))):
            raise AssemblyError(f"Subdomain {i} touches interior dofs of another subdomain")

        ii = row_int & col_int
        ig = row_int & ~col_int
        gg = ~row_int & ~col_int
        K_ii = sp.csr_matrix((vals[ii], (rows[ii] - offset, cols[ii] - offset)), shape=(size, size))
        K_ig = sp.csr_matrix((vals[ig], (rows[ig] - offset, cols[ig] - n_interior)), shape=(size, n_gamma))
        K_gg = sp.csr_matrix(
            (vals[gg], (rows[gg] - n_interior, cols[gg] - n_interior)), shape=(n_gamma, n_gamma)
        )
        for K in (K_ii, K_ig, K_gg):
            K.sum_duplicates()
            K.sort_indices()
        return _SubdomainBlocks(K_ii, K_ig, K_gg)

    batch = executor.map(assemble_subdomain, list(range(partition.n_subdomains)))
    K_gg = sp.csr_matrix((n_gamma, n_gamma))
    for blocks in batch.results:
        K_gg = K_gg + blocks.K_gg
    K_gg = sp.csr_matrix(K_gg)
    K_gg.sort_indices()

    if load is None:
        f_i = tuple(np.zeros(dofmap.interior_size(i)) for i in range(partition.n_subdomains))
        f_gamma = np.zeros(n_gamma)
    else:
        f_i, f_gamma = tuple(load[0]), load[1]

    system = BlockSystem(
        K_ii=tuple(b.K_ii for b in batch.results),
        K_ig=tuple(b.K_ig for b in batch.results),
        K_gi=tuple(sp.csr_matrix(b.K_ig.T) for b in batch.results),
        K_gg=K_gg,
        f_i=(),
        f_gamma=np.zeros(0),
    ).with_load(f_i, f_gamma)

    logger.getChild("assembly").debug(
        f"Assembled {partition.n_subdomains} subdomains: n_I={system.n_interior}, n_Γ={system.n_interface} "
        f"in {batch.total_duration_seconds * 1e3:.1f} ms"
    )
    return system


def assemble_monolithic(
    mesh: StructuredMesh,
    dofmap: DofMap,
    material: MaterialSpec,
    density: Optional[np.ndarray] = None,
) -> sp.csr_matrix:
    """Assemble the whole reduced stiffness matrix in one pass (reference for the block system)."""
    rho = _element_density(mesh, density)
    Ke = element_stiffness(mesh.h, material)
    rows, cols, vals = _element_triplets(mesh, np.arange(mesh.n_elements), rho, Ke, dofmap)
    K = sp.csr_matrix((vals, (rows, cols)), shape=(dofmap.n, dofmap.n))
    K.sum_duplicates()
    K.sort_indices()
    return K


def _edge_load(mesh: StructuredMesh, traction: TractionSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Exact integrals of the 1D hat functions over the loaded segment, per edge node."""
    start, stop = traction.segment(mesh)
    nodes = mesh.edge_nodes(traction.edge)
    s = np.arange(nodes.size) * mesh.h
    weights = np.zeros(nodes.size)
    a = np.maximum(s[:-1], start)
    b = np.minimum(s[1:], stop)
    active = b > a
    left, right = s[:-1][active], s[1:][active]
    a, b = a[active], b[active]
    idx = np.flatnonzero(active)
    # ∫_a^b (right - s)/h ds and ∫_a^b (s - left)/h ds
    weights_left = ((right - a) ** 2 - (right - b) ** 2) / (2.0 * mesh.h)
    weights_right = ((b - left) ** 2 - (a - left) ** 2) / (2.0 * mesh.h)
    np.add.at(weights, idx, weights_left)
    np.add.at(weights, idx + 1, weights_right)
    return nodes, weights


def assemble_load_vector(
    mesh: StructuredMesh,
    body_force: Tuple[float, float],
    tractions: Sequence[TractionSpec],
    bc: BoundarySpec,
) -> np.ndarray:
    """
    Consistent nodal load over all ``2*n_nodes`` dofs.

    Body force is integrated with the Q1 shape functions (each element node
    receives a quarter of the element's force); tractions use exact 1D
    integrals of the edge hat functions.

    Raises:
        BoundaryConditionError: If a traction acts on a clamped edge
    """
    f = np.zeros(mesh.n_dofs)
    fx, fy = float(body_force[0]), float(body_force[1])
    if fx or fy:
        share = 0.25 * mesh.element_area
        counts = np.bincount(mesh.element_nodes.ravel(), minlength=mesh.n_nodes).astype(float)
        f[0::2] += fx * share * counts
        f[1::2] += fy * share * counts

    clamped = set(bc.clamped_edges)
    for traction in tractions:
        if traction.edge in clamped:
            raise BoundaryConditionError(f"Traction applied on the clamped {traction.edge.value} edge")
        g = traction.vector()
        nodes, weights = _edge_load(mesh, traction)
        np.add.at(f, 2 * nodes, g[0] * weights)
        np.add.at(f, 2 * nodes + 1, g[1] * weights)
    return f


def assemble_load(
    mesh: StructuredMesh,
    dofmap: DofMap,
    body_force: Tuple[float, float],
    tractions: Sequence[TractionSpec],
    bc: BoundarySpec,
) -> Tuple[List[np.ndarray], np.ndarray]:
    """
    Load split as (f_I per subdomain, f_Γ); Dirichlet entries are dropped.
    """
    f = dofmap.to_reduced(assemble_load_vector(mesh, body_force, tractions, bc))
    f_i = [f[dofmap.interior_slice(i)].copy() for i in range(dofmap.n_subdomains)]
    return f_i, f[dofmap.n_interior:].copy()


def compliance(u: np.ndarray, f: np.ndarray) -> float:
    """Work of the external loads ``fᵀu``."""
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    if u.shape != f.shape:
        raise DimensionMismatchError("compliance operands", f.shape, u.shape)
    return float(f @ u)
