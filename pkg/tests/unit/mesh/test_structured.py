"""
Unit tests for structured meshes, box partitions and subdomain grids.
"""
import numpy as np
import pytest

from ddelasticity.mesh.structured import (
    BoundarySpec,
    Edge,
    build_mesh,
    partition_mesh,
    square_most_grid,
)
from ddelasticity.utils.exceptions import BoundaryConditionError, MeshError, PartitionError

pytestmark = pytest.mark.unit


class TestBuildMesh:
    """Mesh construction and numbering."""

    def test_cantilever_h32(self):
        mesh = build_mesh((2.0, 1.0), 1 / 32)

        assert (mesh.nx, mesh.ny) == (64, 32)
        assert mesh.n_elements == 2048
        assert mesh.n_nodes == 65 * 33
        assert mesh.n_dofs == 2 * 65 * 33

    def test_single_element(self):
        mesh = build_mesh((1.0, 1.0), 1.0)

        assert mesh.n_elements == 1
        assert mesh.n_nodes == 4
        np.testing.assert_array_equal(mesh.element_nodes[0], [0, 1, 3, 2])

    def test_non_dividing_h_rejected(self):
        with pytest.raises(MeshError):
            build_mesh((2.0, 1.0), 0.3)

    def test_one_third_accepted(self):
        mesh = build_mesh((2.0, 1.0), 1 / 3)
        assert (mesh.nx, mesh.ny) == (6, 3)

    def test_non_positive_h_rejected(self):
        with pytest.raises(MeshError):
            build_mesh((2.0, 1.0), 0.0)

    def test_element_nodes_distinct_and_in_range(self):
        mesh = build_mesh((2.0, 1.0), 1 / 8)

        nodes = mesh.element_nodes
        assert nodes.min() >= 0 and nodes.max() < mesh.n_nodes
        assert all(len(set(row)) == 4 for row in nodes.tolist())

    def test_elements_are_counter_clockwise(self):
        mesh = build_mesh((2.0, 1.0), 0.5)
        coords = mesh.node_coordinates()

        for row in mesh.element_nodes:
            x, y = coords[row, 0], coords[row, 1]
            signed_area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
            assert signed_area == pytest.approx(mesh.element_area)

    def test_element_dofs_interleave_components(self):
        mesh = build_mesh((1.0, 1.0), 1.0)
        np.testing.assert_array_equal(mesh.element_dofs[0], [0, 1, 2, 3, 6, 7, 4, 5])

    def test_mesh_is_immutable(self):
        mesh = build_mesh((1.0, 1.0), 0.5)
        with pytest.raises(ValueError):
            mesh.element_nodes[0, 0] = 5

    def test_edge_nodes(self):
        mesh = build_mesh((2.0, 1.0), 0.5)

        np.testing.assert_array_equal(mesh.edge_nodes(Edge.LEFT), [0, 5, 10])
        np.testing.assert_array_equal(mesh.edge_nodes(Edge.RIGHT), [4, 9, 14])
        np.testing.assert_array_equal(mesh.edge_nodes(Edge.BOTTOM), [0, 1, 2, 3, 4])
        np.testing.assert_array_equal(mesh.edge_nodes(Edge.TOP), [10, 11, 12, 13, 14])
        assert mesh.edge_length(Edge.LEFT) == 1.0
        assert mesh.edge_length(Edge.TOP) == 2.0

    def test_centroids(self):
        mesh = build_mesh((2.0, 1.0), 0.5)
        np.testing.assert_allclose(mesh.element_centroids()[5], [0.75, 0.75])


class TestPartitionMesh:
    """Box partitions of the element grid."""

    def test_sixteen_subdomains(self):
        mesh = build_mesh((2.0, 1.0), 1 / 32)
        partition = partition_mesh(mesh, 4, 4)

        assert partition.n_subdomains == 16
        assert (partition.sub_nx, partition.sub_ny) == (16, 8)
        np.testing.assert_array_equal(np.bincount(partition.element_subdomain), np.full(16, 128))

    def test_sixty_four_subdomains(self):
        mesh = build_mesh((2.0, 1.0), 1 / 32)
        partition = partition_mesh(mesh, 8, 8)

        assert partition.n_subdomains == 64
        assert (partition.sub_nx, partition.sub_ny) == (8, 4)
        np.testing.assert_array_equal(np.bincount(partition.element_subdomain), np.full(64, 32))

    def test_single_subdomain(self):
        mesh = build_mesh((2.0, 1.0), 1 / 8)
        partition = partition_mesh(mesh, 1, 1)

        assert partition.n_subdomains == 1
        assert np.all(partition.element_subdomain == 0)

    def test_subdomains_are_rectangles(self):
        mesh = build_mesh((2.0, 1.0), 1 / 8)
        partition = partition_mesh(mesh, 4, 2)
        grid = partition.element_subdomain.reshape(mesh.ny, mesh.nx)

        for s in range(partition.n_subdomains):
            ex0, ex1, ey0, ey1 = partition.subdomain_box(s)
            assert np.all(grid[ey0:ey1, ex0:ex1] == s)
            assert partition.subdomain_elements(s).size == (ex1 - ex0) * (ey1 - ey0)

    def test_subdomain_numbering_row_major(self):
        mesh = build_mesh((2.0, 1.0), 0.5)
        partition = partition_mesh(mesh, 2, 2)
        grid = partition.element_subdomain.reshape(mesh.ny, mesh.nx)

        np.testing.assert_array_equal(grid, [[0, 0, 1, 1], [2, 2, 3, 3]])

    def test_non_dividing_grid_rejected(self):
        mesh = build_mesh((2.0, 1.0), 1 / 32)
        with pytest.raises(PartitionError):
            partition_mesh(mesh, 3, 1)

    def test_zero_subdomains_rejected(self):
        mesh = build_mesh((2.0, 1.0), 1 / 8)
        with pytest.raises(PartitionError):
            partition_mesh(mesh, 0, 1)

    @pytest.mark.parametrize("px", range(1, 17))
    def test_every_element_assigned_once(self, px):
        for py in range(1, 17):
            mesh = build_mesh((float(px), float(py)), 0.5)
            partition = partition_mesh(mesh, px, py)

            counts = np.bincount(partition.element_subdomain, minlength=px * py)
            assert counts.size == px * py
            np.testing.assert_array_equal(counts, 4)

            covered = np.zeros((mesh.ny, mesh.nx), dtype=int)
            for s in range(partition.n_subdomains):
                ex0, ex1, ey0, ey1 = partition.subdomain_box(s)
                covered[ey0:ey1, ex0:ex1] += 1
            np.testing.assert_array_equal(covered, 1)


class TestSquareMostGrid:
    """Mapping a subdomain count onto px × py."""

    @pytest.mark.parametrize("n,expected", [
        (1, (1, 1)),
        (2, (2, 1)),
        (4, (2, 2)),
        (8, (4, 2)),
        (16, (4, 4)),
        (64, (8, 8)),
        (256, (16, 16)),
    ])
    def test_factorisation(self, n, expected):
        assert square_most_grid(n) == expected

    def test_longer_side_gets_more_subdomains(self):
        assert square_most_grid(8, width=1.0, height=2.0) == (2, 4)

    def test_invalid_count(self):
        with pytest.raises(PartitionError):
            square_most_grid(0)


class TestBoundarySpec:

    def test_empty_dirichlet_set_rejected(self):
        mesh = build_mesh((1.0, 1.0), 0.5)
        with pytest.raises(BoundaryConditionError):
            BoundarySpec.clamped([]).dirichlet_nodes(mesh)

    def test_corner_nodes_not_duplicated(self):
        mesh = build_mesh((1.0, 1.0), 0.5)
        nodes = BoundarySpec.clamped(["right", "top"]).dirichlet_nodes(mesh)
        np.testing.assert_array_equal(nodes, [2, 5, 6, 7, 8])
