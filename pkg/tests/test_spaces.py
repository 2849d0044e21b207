import numpy as np
import pytest

from blocksolve.mesh import build_unit_square, build_unit_cube
from blocksolve.spaces import (build_space, taylor_hood, MixedSpace,
                               DirichletBC, interpolate)


class TestScalarSpace:
    def test_p1_dofs_are_vertices(self):
        mesh = build_unit_square(3)
        V = build_space(mesh, 1)
        assert V.num_dofs == mesh.num_vertices

    def test_p2_dof_count(self):
        # vertices + edges on an n=2 square: 9 + 16 = 25
        mesh = build_unit_square(2)
        V = build_space(mesh, 2)
        assert V.num_dofs == 25

    def test_dof_count_formula(self):
        # P_k on a structured n x n triangulation of the square has
        # (k n + 1)^2 dofs
        for n in (2, 3):
            for k in (1, 2, 3, 4):
                V = build_space(build_unit_square(n), k)
                assert V.num_dofs == (k * n + 1) ** 2

    def test_shared_dofs_coincide(self):
        mesh = build_unit_square(2)
        V = build_space(mesh, 3)
        # coordinates of equal dof ids must agree across cells
        for ci, dofs in enumerate(V.cell_scalar_dofs):
            coords = V.scalar_dof_coords[dofs]
            assert len(np.unique(dofs)) == len(dofs)
            assert coords.shape == (V.element.nnodes, 2)

    def test_boundary_dofs(self):
        mesh = build_unit_square(2)
        V = build_space(mesh, 2)
        left = V.boundary_scalar_dofs([1])
        assert np.allclose(V.scalar_dof_coords[left][:, 0], 0.0)
        assert len(left) == 5  # 2*2+1 nodes on one edge
        with pytest.raises(ValueError):
            V.boundary_scalar_dofs([7])


class TestVectorAndMixed:
    def test_interleaving(self):
        mesh = build_unit_square(2)
        V = build_space(mesh, 1, ncomp=2)
        assert V.num_dofs == 2 * mesh.num_vertices
        # components of one node are adjacent
        assert V.cell_dofs[0, 1] == V.cell_dofs[0, 0] + 1

    def test_taylor_hood_counts(self):
        mesh = build_unit_square(2)
        W = taylor_hood(mesh)
        assert W.fields[0].num_dofs == 50
        assert W.fields[1].num_dofs == 9
        assert W.num_dofs == 59
        assert np.array_equal(W.offsets, [0, 50, 59])

    def test_field_index_sets_partition(self):
        mesh = build_unit_square(2)
        W = taylor_hood(mesh)
        all_idx = np.concatenate([W.field_index_set(i)
                                  for i in range(W.num_fields)])
        assert np.array_equal(all_idx, np.arange(W.num_dofs))

    def test_split_round_trip(self):
        mesh = build_unit_square(2)
        W = taylor_hood(mesh)
        x = np.arange(W.num_dofs, dtype=float)
        parts = W.split(x)
        assert np.array_equal(np.concatenate(parts), x)

    def test_mixed_requires_common_mesh(self):
        V1 = build_space(build_unit_square(2), 1)
        V2 = build_space(build_unit_square(3), 1)
        with pytest.raises(ValueError):
            MixedSpace([V1, V2])


class TestDirichletBC:
    def test_constant_value(self):
        mesh = build_unit_square(2)
        V = build_space(mesh, 1)
        bc = DirichletBC(V, (1, 2, 3, 4), value=3.5)
        assert np.all(bc.values == 3.5)
        assert len(bc.dofs) == 8  # boundary vertices of the n=2 square

    def test_callable_value(self):
        mesh = build_unit_square(2)
        V = build_space(mesh, 1)
        bc = DirichletBC(V, (4,), value=lambda x: x[0])
        coords = V.scalar_dof_coords[bc.dofs]
        assert np.allclose(bc.values, coords[:, 0])

    def test_vector_value(self):
        mesh = build_unit_square(2)
        V = build_space(mesh, 2, ncomp=2)
        bc = DirichletBC(V, (3,), value=[1.0, 2.0])
        assert np.allclose(bc.values[::2], 1.0)
        assert np.allclose(bc.values[1::2], 2.0)

    def test_dofs_sorted(self):
        mesh = build_unit_square(3)
        V = build_space(mesh, 2)
        bc = DirichletBC(V, (1, 3))
        assert np.all(np.diff(bc.dofs) > 0)


def test_interpolate():
    mesh = build_unit_square(4)
    V = build_space(mesh, 2)
    x = interpolate(V, lambda p: p[0] + 2 * p[1])
    assert np.allclose(x, V.scalar_dof_coords[:, 0]
                       + 2 * V.scalar_dof_coords[:, 1])


def test_cube_space():
    mesh = build_unit_cube(2)
    V = build_space(mesh, 2)
    assert V.num_dofs == (2 * 2 + 1) ** 3
