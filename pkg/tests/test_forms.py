import numpy as np
import pytest

from blocksolve.mesh import build_unit_square
from blocksolve.spaces import (build_space, taylor_hood, MixedSpace,
                               DirichletBC, interpolate)
from blocksolve.forms import (mass_form, stiffness_form,
                              convection_diffusion_form, stokes_form,
                              ns_jacobian_form, rb_jacobian_form,
                              pressure_mass_form, load_vector,
                              ns_residual, rb_residual, poisson_residual,
                              jacobian_check, collect_bc_dofs)


def _unit_right_triangle_space():
    # smallest mesh whose first cell is the unit right triangle scaled
    # by 1/n; use n=1 so the cell is the reference-sized triangle
    mesh = build_unit_square(1)
    return build_space(mesh, 1)


class TestLocalKernels:
    def test_p1_mass_kernel(self):
        V = _unit_right_triangle_space()
        form = mass_form(V)
        loc = form.element_kernel(0)
        area = 0.5
        expect = (area / 12.0) * np.array([[2.0, 1.0, 1.0],
                                           [1.0, 2.0, 1.0],
                                           [1.0, 1.0, 2.0]])
        # rows/cols follow the cell's local vertex order; the matrix is
        # permutation-invariant so compare directly
        assert np.allclose(loc, expect, atol=1e-14)

    def test_p1_stiffness_kernel_row_sums(self):
        V = _unit_right_triangle_space()
        loc = stiffness_form(V).element_kernel(0)
        assert np.allclose(loc.sum(axis=1), 0.0, atol=1e-14)
        assert np.allclose(loc, loc.T, atol=1e-14)
        assert np.isclose(np.abs(loc).max(), 1.0, atol=1e-14)

    def test_mass_matrix_total_sum_is_domain_area(self):
        mesh = build_unit_square(3)
        V = build_space(mesh, 2)
        M = mass_form(V).assemble()
        assert np.isclose(M.sum(), 1.0, atol=1e-13)

    def test_interior_poisson_row(self):
        # no-BC assembly on n=2: the single interior vertex row has
        # diagonal 4 and off-diagonal entries summing to -4
        mesh = build_unit_square(2)
        V = build_space(mesh, 1)
        A = stiffness_form(V).assemble().toarray()
        interior = int(np.argmin(
            np.sum((V.scalar_dof_coords - 0.5) ** 2, axis=1)))
        row = A[interior]
        assert np.isclose(row[interior], 4.0, atol=1e-13)
        assert np.isclose(row.sum(), 0.0, atol=1e-13)
        off = np.delete(row, interior)
        assert np.isclose(off.min(), -1.0, atol=1e-13)


class TestAssembleActionConsistency:
    @pytest.mark.parametrize("make", [
        lambda V: mass_form(V),
        lambda V: stiffness_form(V, kappa=2.5),
        lambda V: convection_diffusion_form(V, nu=0.1, wind=[1.0, 0.5]),
    ])
    def test_scalar_forms(self, make):
        mesh = build_unit_square(3)
        V = build_space(mesh, 2)
        form = make(V)
        A = form.assemble()
        rng = np.random.default_rng(7)
        for _ in range(3):
            x = rng.standard_normal(V.num_dofs)
            assert np.allclose(form.action(x), A @ x, atol=1e-12)

    def test_with_bcs(self):
        mesh = build_unit_square(3)
        V = build_space(mesh, 2)
        bc = DirichletBC(V, (1, 2, 3, 4))
        form = stiffness_form(V)
        A = form.assemble(bcs=[bc])
        rng = np.random.default_rng(8)
        x = rng.standard_normal(V.num_dofs)
        assert np.allclose(form.action(x, bcs=[bc]), A @ x, atol=1e-12)
        # Dirichlet rows act as identity
        assert np.allclose((A @ x)[bc.dofs], x[bc.dofs])

    def test_stokes_saddle_structure(self):
        mesh = build_unit_square(2)
        W = taylor_hood(mesh)
        A = stokes_form(W).assemble().toarray()
        nu = W.fields[0].num_dofs
        # pressure-pressure block is empty
        assert np.allclose(A[nu:, nu:], 0.0)
        # pressure gradient is the negative transpose of divergence
        assert np.allclose(A[:nu, nu:], -A[nu:, :nu].T, atol=1e-13)


class TestJacobians:
    def test_ns_jacobian_at_zero_state_is_stokes(self):
        mesh = build_unit_square(2)
        W = taylor_hood(mesh)
        J = ns_jacobian_form(W, Re=7.0).assemble()
        S = stokes_form(MixedSpace(W.fields), Re=7.0).assemble()
        assert np.allclose((J - S).toarray(), 0.0, atol=1e-13)

    def test_ns_fd_jacobian(self):
        mesh = build_unit_square(3)
        W = taylor_hood(mesh)
        bcs = [DirichletBC(W.fields[0], (1, 2, 3, 4),
                           value=[0.0, 0.0], field=0)]
        form = ns_jacobian_form(W, Re=50.0)
        rng = np.random.default_rng(11)
        state = 0.1 * rng.standard_normal(W.num_dofs)
        err = jacobian_check(lambda x: ns_residual(form, x, bcs),
                             form, state, bcs, rng=rng)
        assert err < 1e-6

    def test_rb_fd_jacobian(self):
        mesh = build_unit_square(2)
        V = build_space(mesh, 2, ncomp=2)
        Q = build_space(mesh, 1)
        T = build_space(mesh, 1)
        W = MixedSpace([V, Q, T])
        bcs = [DirichletBC(V, (1, 2, 3, 4), value=[0.0, 0.0], field=0),
               DirichletBC(T, (1,), value=1.0, field=2),
               DirichletBC(T, (2,), value=0.0, field=2)]
        form = rb_jacobian_form(W, Ra=200.0, Pr=6.18)
        rng = np.random.default_rng(12)
        state = 0.1 * rng.standard_normal(W.num_dofs)
        err = jacobian_check(lambda x: rb_residual(form, x, bcs),
                             form, state, bcs, rng=rng)
        assert err < 1e-6


class TestResiduals:
    def test_poisson_residual_vanishes_at_solution(self):
        mesh = build_unit_square(3)
        V = build_space(mesh, 1)
        bc = DirichletBC(V, (1, 2, 3, 4))
        form = stiffness_form(V)
        rhs = load_vector(form, 1.0)
        import scipy.sparse.linalg as spla
        A = form.assemble(bcs=[bc]).tocsc()
        b = rhs.copy()
        b[bc.dofs] = 0.0
        x = spla.spsolve(A, b)
        r = poisson_residual(form, x, bcs=[bc], rhs=rhs)
        assert np.linalg.norm(r) < 1e-12

    def test_residual_dirichlet_rows_hold_defect(self):
        mesh = build_unit_square(2)
        W = taylor_hood(mesh)
        lid = lambda x: [1.0, 0.0] if abs(x[1] - 1.0) < 1e-12 \
            else [0.0, 0.0]
        bcs = [DirichletBC(W.fields[0], (1, 2, 3, 4), value=lid, field=0)]
        form = ns_jacobian_form(W, Re=1.0)
        r = ns_residual(form, np.zeros(W.num_dofs), bcs)
        dofs = collect_bc_dofs(W, bcs)
        from blocksolve.forms import collect_bc_values
        d, v = collect_bc_values(W, bcs)
        # zero state minus boundary data
        assert np.allclose(r[d], -v, atol=1e-14)


def test_load_vector_against_mass_matrix():
    # (1, v) equals M @ 1
    mesh = build_unit_square(3)
    V = build_space(mesh, 2)
    form = mass_form(V)
    b = load_vector(form, 1.0)
    M = form.assemble()
    assert np.allclose(b, M @ np.ones(V.num_dofs), atol=1e-13)


def test_quadrature_degree_override():
    mesh = build_unit_square(2)
    V = build_space(mesh, 1)
    f1 = mass_form(V)
    assert f1.quad_degree == 3
