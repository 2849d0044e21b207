"""Composable preconditioners.

Every preconditioner is set up against a linear operator and exposes
`apply` (one application of the inverse of its defining matrix M) plus a
`view` tree for inspection.  Algebraic preconditioners (jacobi, sor, lu,
ilu) demand an assembled operator; context-bearing ones (fieldsplit, pcd,
mass, schwarz, assembled) read PDE-level information off implicit
operators and raise MissingContext when it is not there.

Nested solvers are supplied as maker callables so that option-driven
construction (the solver factory) and direct library use share one code
path: a maker receives the sub-operator and returns a fully configured
KSP (or preconditioner) for it.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .forms import (Form, StiffnessTerm, AdvectionTerm, StateWind,
                    apply_bcs_matrix, pressure_mass_form,
                    pressure_laplacian_form)
from .krylov import KSP
from .operators import (AssembledOperator, ImplicitOperator, LinearOperator)
from .spaces import build_space
from .elements import lagrange_element, tabulate

__all__ = ["Preconditioner", "MissingContext", "UnsupportedOperation",
           "NonePC", "JacobiPC", "SORPC", "LUPC", "ILUPC", "KSPPC",
           "AssembledPC", "TelescopePC", "FieldSplitPC", "PCDPC",
           "MassSchurPC", "SchwarzPC", "SchurOperator", "view_ksp"]


class MissingContext(Exception):
    """The preconditioner needs PDE-level context the operator lacks."""


class UnsupportedOperation(Exception):
    pass


def _assembled(op, who):
    if isinstance(op, AssembledOperator):
        return op.A
    raise MissingContext(
        f"{who} needs an assembled operator; wrap the solve with an "
        f"'assembled' preconditioner or assemble the operator first")


def _implicit(op, who):
    if isinstance(op, ImplicitOperator):
        return op
    raise MissingContext(f"{who} needs an implicit operator carrying a form")


class Preconditioner:
    type_name = "none"

    def __init__(self, prefix=""):
        self.prefix = prefix
        self.op = None

    def set_up(self, A, Apc=None):
        self.op = Apc if Apc is not None else A
        self._set_up(self.op)
        return self

    def _set_up(self, op):
        pass

    def apply(self, r):
        raise NotImplementedError

    def apply_transpose(self, r):
        raise UnsupportedOperation(
            f"pc {self.type_name} has no transpose application")

    def view(self, indent=0):
        pad = " " * indent
        lines = [f"{pad}PC ({self.prefix or '-'}) type: {self.type_name}"]
        lines.extend(self._view_body(indent + 2))
        return "\n".join(lines)

    def _view_body(self, indent):
        return []


def view_ksp(ksp, indent=0):
    """Text tree for a KSP and its nested preconditioner."""
    pad = " " * indent
    lines = [f"{pad}KSP ({ksp.prefix or '-'}) type: {ksp.type}"]
    if ksp.type not in ("preonly",):
        detail = (f"rtol={ksp.rtol:g}, atol={ksp.atol:g}, "
                  f"max_it={ksp.max_it}")
        if ksp.type in ("gmres", "fgmres"):
            detail += (f", restart={ksp.restart}, "
                       f"orthogonalization={ksp.orthogonalization}")
        detail += f", side={ksp.side}"
        lines.append(f"{pad}  {detail}")
    if ksp.pc is not None:
        lines.append(ksp.pc.view(indent + 2))
    else:
        lines.append(f"{pad}  PC (-) type: none")
    return "\n".join(lines)


def _default_sub_ksp(op, prefix=""):
    """Fallback nested solver: direct where possible, tight GMRES else."""
    if isinstance(op, AssembledOperator) or isinstance(op, ImplicitOperator):
        pc = LUPC(prefix=prefix).set_up(op.assemble())
        return KSP("preonly", pc=pc, prefix=prefix)
    return KSP("gmres", rtol=1e-10, max_it=500, prefix=prefix)


# --- algebraic -------------------------------------------------------------

class NonePC(Preconditioner):
    type_name = "none"

    def apply(self, r):
        return r.copy()

    def apply_transpose(self, r):
        return r.copy()


class JacobiPC(Preconditioner):
    type_name = "jacobi"

    def _set_up(self, op):
        d = _assembled(op, "pc jacobi").diagonal()
        if np.any(d == 0.0):
            raise ValueError("pc jacobi: zero diagonal entry")
        self.invdiag = 1.0 / d

    def apply(self, r):
        return self.invdiag * r

    apply_transpose = apply


def _triangular_factor(T):
    return spla.splu(sp.csc_matrix(T), permc_spec="NATURAL",
                     options={"SymmetricMode": False})


class SORPC(Preconditioner):
    """(S)SOR sweeps.  Forward sweeps by default; `symmetric` gives the
    SSOR preconditioner (usable with CG)."""

    type_name = "sor"

    def __init__(self, omega=1.0, its=1, symmetric=True, prefix=""):
        super().__init__(prefix)
        if not 0.0 < omega < 2.0:
            raise ValueError("sor relaxation must lie in (0, 2)")
        self.omega = omega
        self.its = its
        self.symmetric = symmetric

    def _set_up(self, op):
        A = _assembled(op, "pc sor").tocsr()
        d = A.diagonal()
        if np.any(d == 0.0):
            raise ValueError("pc sor: zero diagonal entry")
        w = self.omega
        Dw = sp.diags(d / w)
        L = sp.tril(A, k=-1)
        U = sp.triu(A, k=1)
        self.A = A
        self.d = d
        self._fwd = _triangular_factor(Dw + L)
        self._bwd = _triangular_factor(Dw + U)

    def _sweep(self, r, transpose=False):
        w = self.omega
        first, second = (self._bwd, self._fwd) if transpose \
            else (self._fwd, self._bwd)
        if self.symmetric:
            y = first.solve(r)
            return w * (2.0 - w) * second.solve((self.d / w) * y)
        return first.solve(r)

    def _iterate(self, r, transpose):
        z = self._sweep(r, transpose)
        A = self.A.T if transpose else self.A
        for _ in range(self.its - 1):
            z = z + self._sweep(r - A @ z, transpose)
        return z

    def apply(self, r):
        return self._iterate(r, False)

    def apply_transpose(self, r):
        if self.symmetric:
            return self._iterate(r, False)
        return self._iterate(r, True)

    def _view_body(self, indent):
        pad = " " * indent
        return [f"{pad}omega={self.omega:g}, its={self.its}, "
                f"symmetric={self.symmetric}"]


class LUPC(Preconditioner):
    type_name = "lu"

    def _set_up(self, op):
        self.fact = spla.splu(sp.csc_matrix(_assembled(op, "pc lu")))

    def apply(self, r):
        return self.fact.solve(r)

    def apply_transpose(self, r):
        return self.fact.solve(r, trans="T")


class ILUPC(Preconditioner):
    type_name = "ilu"

    def __init__(self, drop_tol=1e-4, fill_factor=10.0, prefix=""):
        super().__init__(prefix)
        self.drop_tol = drop_tol
        self.fill_factor = fill_factor

    def _set_up(self, op):
        self.fact = spla.spilu(sp.csc_matrix(_assembled(op, "pc ilu")),
                               drop_tol=self.drop_tol,
                               fill_factor=self.fill_factor)

    def apply(self, r):
        return self.fact.solve(r)

    def apply_transpose(self, r):
        return self.fact.solve(r, trans="T")

    def _view_body(self, indent):
        pad = " " * indent
        return [f"{pad}drop_tol={self.drop_tol:g}, "
                f"fill_factor={self.fill_factor:g}"]


# --- solver-as-preconditioner ---------------------------------------------

class KSPPC(Preconditioner):
    """An inner Krylov solve used as a preconditioner.  The outer method
    must be flexible (fgmres or richardson) unless the inner iteration is
    run to a fixed, state-independent operation count."""

    type_name = "ksp"

    def __init__(self, ksp_maker=None, prefix=""):
        super().__init__(prefix)
        self.ksp_maker = ksp_maker

    def _set_up(self, op):
        maker = self.ksp_maker or (lambda A: _default_sub_ksp(
            A, self.prefix + "ksp_"))
        self.ksp = maker(op)

    def apply(self, r):
        x, _ = self.ksp.solve(self.op, r)
        return x

    def _view_body(self, indent):
        return [view_ksp(self.ksp, indent)]


class AssembledPC(Preconditioner):
    """Force-assemble an implicit operator and precondition with an inner
    (typically algebraic) preconditioner built on the assembled matrix."""

    type_name = "assembled"

    def __init__(self, inner_maker=None, prefix=""):
        super().__init__(prefix)
        self.inner_maker = inner_maker

    def _set_up(self, op):
        if isinstance(op, AssembledOperator):
            target = op
        else:
            target = _implicit(op, "pc assembled").assemble()
        self.assembled_op = target
        maker = self.inner_maker or (lambda A: LUPC(
            prefix=self.prefix + "assembled_").set_up(A))
        self.inner = maker(target)

    def apply(self, r):
        return self.inner.apply(r)

    def apply_transpose(self, r):
        return self.inner.apply_transpose(r)

    def _view_body(self, indent):
        return [self.inner.view(indent)]


class TelescopePC(Preconditioner):
    """Pass-through wrapper around an inner preconditioner (kept for
    option-file compatibility with redistribution-style solver layouts;
    serial operation makes it the identity wrapper)."""

    type_name = "telescope"

    def __init__(self, inner_maker=None, prefix=""):
        super().__init__(prefix)
        self.inner_maker = inner_maker

    def _set_up(self, op):
        maker = self.inner_maker or (lambda A: LUPC(
            prefix=self.prefix + "telescope_").set_up(A.assemble()))
        self.inner = maker(op)

    def apply(self, r):
        return self.inner.apply(r)

    def apply_transpose(self, r):
        return self.inner.apply_transpose(r)

    def _view_body(self, indent):
        return [self.inner.view(indent)]


# --- fieldsplit ------------------------------------------------------------

class SchurOperator(LinearOperator):
    """Matrix-free Schur complement S = A11 - A10 inv(A00) A01, where the
    inner inverse is realised by a solver on the (0,0) block.  The
    operator keeps the (1,1) sub-operator around so that preconditioners
    built on S can still reach the PDE context."""

    def __init__(self, a11, a10, a01, a00_ksp, a00):
        self.a11 = a11
        self.a10 = a10
        self.a01 = a01
        self.a00_ksp = a00_ksp
        self.a00 = a00
        self.shape = a11.shape

    @property
    def context(self):
        return getattr(self.a11, "context", {})

    def inner_solve(self, v):
        x, _ = self.a00_ksp.solve(self.a00, v)
        return x

    def apply(self, x):
        y = self.a11.apply(x)
        return y - self.a10.apply(self.inner_solve(self.a01.apply(x)))


class FieldSplitPC(Preconditioner):
    """Block preconditioning by fields: additive (block Jacobi),
    multiplicative (lower block Gauss-Seidel), or a 2x2 Schur-complement
    factorisation (diag / lower / upper / full)."""

    type_name = "fieldsplit"

    def __init__(self, splits=None, fs_type="additive", fact_type="full",
                 sub_ksp_maker=None, prefix=""):
        super().__init__(prefix)
        if fs_type not in ("additive", "multiplicative", "schur"):
            raise ValueError(f"unknown fieldsplit type {fs_type!r}")
        if fact_type not in ("diag", "lower", "upper", "full"):
            raise ValueError(f"unknown schur factorization {fact_type!r}")
        self.splits = splits
        self.fs_type = fs_type
        self.fact_type = fact_type
        self.sub_ksp_maker = sub_ksp_maker

    def _index_sets(self, op):
        fields = op.field_index_sets()
        if fields is None:
            raise MissingContext("pc fieldsplit needs an operator with "
                                 "field information")
        splits = self.splits
        if splits is None:
            splits = [(i,) for i in range(len(fields))]
        self.splits = [tuple(s) for s in splits]
        return [np.concatenate([fields[f] for f in s]) for s in self.splits]

    def _set_up(self, op):
        iss = self._index_sets(op)
        ns = len(iss)
        maker = self.sub_ksp_maker or (lambda i, sub: _default_sub_ksp(
            sub, f"{self.prefix}fieldsplit_{i}_"))
        self.diag_ops = [op.extract_sub(iss[i], iss[i]) for i in range(ns)]
        self.index_sets = iss
        if self.fs_type == "schur":
            if ns != 2:
                raise ValueError("schur fieldsplit needs exactly two splits")
            self.off_ops = {(0, 1): op.extract_sub(iss[0], iss[1]),
                            (1, 0): op.extract_sub(iss[1], iss[0])}
            f_ksp = maker(0, self.diag_ops[0])
            self.schur = SchurOperator(self.diag_ops[1],
                                       self.off_ops[(1, 0)],
                                       self.off_ops[(0, 1)],
                                       f_ksp, self.diag_ops[0])
            self.sub_ksps = [f_ksp, maker(1, self.schur)]
        else:
            self.off_ops = {}
            if self.fs_type == "multiplicative":
                for i in range(ns):
                    for j in range(i):
                        self.off_ops[(i, j)] = op.extract_sub(iss[i], iss[j])
            self.sub_ksps = [maker(i, self.diag_ops[i]) for i in range(ns)]

    def _sub_solve(self, i, r, op=None):
        x, _ = self.sub_ksps[i].solve(op if op is not None else
                                      self.diag_ops[i], r)
        return x

    def apply(self, r):
        iss = self.index_sets
        z = np.zeros_like(r)
        if self.fs_type == "additive":
            for i, idx in enumerate(iss):
                z[idx] = self._sub_solve(i, r[idx])
        elif self.fs_type == "multiplicative":
            parts = []
            for i, idx in enumerate(iss):
                rhs = r[idx].copy()
                for j in range(i):
                    rhs -= self.off_ops[(i, j)].apply(parts[j])
                parts.append(self._sub_solve(i, rhs))
                z[idx] = parts[i]
        else:
            z0, z1 = self._apply_schur(r[iss[0]], r[iss[1]])
            z[iss[0]] = z0
            z[iss[1]] = z1
        return z

    def _apply_schur(self, r0, r1):
        fact = self.fact_type
        A01, A10 = self.off_ops[(0, 1)], self.off_ops[(1, 0)]
        if fact == "diag":
            return (self._sub_solve(0, r0),
                    self._sub_solve(1, r1, op=self.schur))
        if fact == "upper":
            z1 = self._sub_solve(1, r1, op=self.schur)
            z0 = self._sub_solve(0, r0 - A01.apply(z1))
            return z0, z1
        z0 = self._sub_solve(0, r0)
        z1 = self._sub_solve(1, r1 - A10.apply(z0), op=self.schur)
        if fact == "lower":
            return z0, z1
        # full LDU: one extra velocity-block solve against the upper factor
        z0 = z0 - self._sub_solve(0, A01.apply(z1))
        return z0, z1

    def _view_body(self, indent):
        pad = " " * indent
        lines = [f"{pad}type={self.fs_type}" +
                 (f", factorization={self.fact_type}"
                  if self.fs_type == "schur" else "")]
        for i, s in enumerate(self.splits):
            lines.append(f"{pad}split {i}: fields {s}")
            lines.append(view_ksp(self.sub_ksps[i], indent + 2))
        return lines


# --- pressure Schur approximations ----------------------------------------

def _pressure_setup(op, who):
    """Pressure space, context, and state space off a Schur or implicit
    operator."""
    if isinstance(op, SchurOperator):
        op = op.a11
    impl = _implicit(op, who)
    form = impl.form
    if form.col_space.num_fields != 1:
        raise MissingContext(f"{who} expects a single-field pressure block")
    if form.col_space.fields[0].ncomp != 1:
        raise MissingContext(f"{who} expects a scalar pressure space")
    return form.col_space.fields[0], form.context, form.state_space


class PCDPC(Preconditioner):
    """Pressure convection-diffusion Schur approximation
    z = inv(Kp) Fp inv(Mp) r with Mp the pressure mass matrix, Kp the
    pressure Laplacian (pure Neumann, one pinned dof), and Fp the pressure
    convection-diffusion operator linearised at the current state."""

    type_name = "pcd"

    def __init__(self, mp_maker=None, kp_maker=None, prefix=""):
        super().__init__(prefix)
        self.mp_maker = mp_maker
        self.kp_maker = kp_maker

    def _set_up(self, op):
        p_space, ctx, state_space = _pressure_setup(op, "pc pcd")
        if "state" not in ctx:
            raise MissingContext("pc pcd needs a state in the operator "
                                 "context to linearise the pressure "
                                 "convection term")
        Re = float(ctx.get("Re", 1.0))
        vf = int(ctx.get("velocity_field", 0))
        Mp = AssembledOperator(pressure_mass_form(p_space).assemble())
        Kp = pressure_laplacian_form(p_space).assemble()
        pin = np.array([0], dtype=np.int64)
        Kp = apply_bcs_matrix(Kp, pin, pin, diagonal=True)
        Kp = AssembledOperator(Kp)
        self.fp_form = Form("pressure_convection_diffusion",
                            p_space, p_space,
                            {(0, 0): [StiffnessTerm(1.0 / Re),
                                      AdvectionTerm(StateWind(vf))]},
                            context=ctx, state_space=state_space)
        mp_maker = self.mp_maker or (lambda A: _default_sub_ksp(
            A, self.prefix + "pcd_Mp_"))
        kp_maker = self.kp_maker or (lambda A: _default_sub_ksp(
            A, self.prefix + "pcd_Kp_"))
        self.mp_op, self.kp_op = Mp, Kp
        self.mp_ksp = mp_maker(Mp)
        self.kp_ksp = kp_maker(Kp)

    def apply(self, r):
        y, _ = self.mp_ksp.solve(self.mp_op, r)
        y = self.fp_form.action(y)
        y[0] = 0.0  # pinned pressure dof fixes the constant mode
        z, _ = self.kp_ksp.solve(self.kp_op, y)
        return z

    def _view_body(self, indent):
        pad = " " * indent
        return [f"{pad}mass solve:", view_ksp(self.mp_ksp, indent + 2),
                f"{pad}laplacian solve:", view_ksp(self.kp_ksp, indent + 2)]


class MassSchurPC(Preconditioner):
    """Viscosity-scaled pressure mass approximation of the Schur
    complement: z = (1/Re) inv(Mp) r."""

    type_name = "mass"

    def __init__(self, mp_maker=None, prefix=""):
        super().__init__(prefix)
        self.mp_maker = mp_maker

    def _set_up(self, op):
        p_space, ctx, _ = _pressure_setup(op, "pc mass")
        self.scale = 1.0 / float(ctx.get("Re", 1.0))
        self.mp_op = AssembledOperator(pressure_mass_form(p_space).assemble())
        maker = self.mp_maker or (lambda A: _default_sub_ksp(
            A, self.prefix + "mass_"))
        self.mp_ksp = maker(self.mp_op)

    def apply(self, r):
        z, _ = self.mp_ksp.solve(self.mp_op, r)
        return self.scale * z

    apply_transpose = apply

    def _view_body(self, indent):
        pad = " " * indent
        return [f"{pad}scale={self.scale:g}", view_ksp(self.mp_ksp, indent)]


# --- two-level additive Schwarz -------------------------------------------

class SchwarzPC(Preconditioner):
    """Two-level additive Schwarz: vertex-patch solves on the fine space
    plus an exact coarse solve on the piecewise-linear space on the same
    mesh, combined additively.  Patch dofs are those whose supporting
    cells all lie in the vertex star; Dirichlet dofs act as identity."""

    type_name = "schwarz"

    def __init__(self, store_operators=True, prefix=""):
        super().__init__(prefix)
        self.store_operators = store_operators

    def _set_up(self, op):
        impl = _implicit(op, "pc schwarz")
        form = impl.form
        if form.col_space.num_fields != 1 or form.row_space is not form.col_space:
            raise MissingContext("pc schwarz expects a square single-field "
                                 "operator")
        V = form.col_space.fields[0]
        if V.element.degree < 2:
            raise ValueError("pc schwarz needs polynomial degree >= 2; the "
                             "coarse space would coincide with the fine one")
        mesh = V.mesh
        nc = V.ncomp
        self.A = impl.assemble().A
        self.bc_dofs = np.asarray(impl.bc_rows, dtype=np.int64)

        # coarse level: same form on the degree-1 space, same markers
        Vc = build_space(mesh, 1, ncomp=nc)
        coarse_form = Form(form.kind + "_coarse", Vc, Vc, form.blocks,
                           context=form.context)
        cdofs = [np.empty(0, dtype=np.int64)]
        for bc in impl.bcs:
            cdofs.append(Vc.boundary_dofs(bc.markers))
        if not impl.bcs and len(self.bc_dofs):
            raise MissingContext("pc schwarz needs boundary conditions as "
                                 "marker-bearing objects to build the "
                                 "coarse level")
        cbc = np.unique(np.concatenate(cdofs))
        self.coarse_bc = cbc
        Ac = coarse_form.assemble(bc_rows=cbc, bc_cols=cbc)
        self.coarse_fact = spla.splu(sp.csc_matrix(Ac))
        self.P = self._prolongation(V, Vc)

        # vertex patches
        self.patch_dofs = self._build_patches(V, mesh, nc)
        if self.store_operators:
            self.patch_facts = [
                dla.lu_factor(self.A[np.ix_(pd, pd)].toarray())
                for pd in self.patch_dofs]

    @staticmethod
    def _prolongation(V, Vc):
        """Interpolation from the degree-1 space into the fine space."""
        p1 = lagrange_element(V.mesh.dim, 1)
        vals = tabulate(p1, V.element.nodes).values  # (nfine, nverts)
        entries = {}
        for ci in range(V.mesh.num_cells):
            fine = V.cell_scalar_dofs[ci]
            coarse = Vc.cell_scalar_dofs[ci]
            for ln, fs in enumerate(fine):
                for a, cs in enumerate(coarse):
                    v = vals[ln, a]
                    if abs(v) > 1e-14:
                        entries[(fs, cs)] = v
        rows = np.fromiter((k[0] for k in entries), dtype=np.int64,
                           count=len(entries))
        cols = np.fromiter((k[1] for k in entries), dtype=np.int64,
                           count=len(entries))
        data = np.fromiter(entries.values(), dtype=float, count=len(entries))
        Ps = sp.csr_matrix((data, (rows, cols)),
                           shape=(V.num_scalar_dofs, Vc.num_scalar_dofs))
        if V.ncomp == 1:
            return Ps
        return sp.kron(Ps, sp.eye(V.ncomp), format="csr")

    def _build_patches(self, V, mesh, nc):
        dof_cells = [set() for _ in range(V.num_scalar_dofs)]
        for ci, sdofs in enumerate(V.cell_scalar_dofs):
            for s in sdofs:
                dof_cells[s].add(ci)
        bc = set(int(d) for d in self.bc_dofs)
        patches = []
        for v in range(mesh.num_vertices):
            cells = set(int(c) for c in mesh.vertex_to_cells[v])
            cands = np.unique(V.cell_scalar_dofs[sorted(cells)])
            keep = [s for s in cands if dof_cells[s] <= cells]
            dofs = [s * nc + k for s in keep for k in range(nc)
                    if s * nc + k not in bc]
            if dofs:
                patches.append(np.array(dofs, dtype=np.int64))
        return patches

    def apply(self, r):
        rc = self.P.T @ r
        rc[self.coarse_bc] = 0.0
        zc = self.coarse_fact.solve(rc)
        z = self.P @ zc
        if self.store_operators:
            for pd, fact in zip(self.patch_dofs, self.patch_facts):
                z[pd] += dla.lu_solve(fact, r[pd])
        else:
            for pd in self.patch_dofs:
                Ap = self.A[np.ix_(pd, pd)].toarray()
                z[pd] += np.linalg.solve(Ap, r[pd])
        if len(self.bc_dofs):
            z[self.bc_dofs] = r[self.bc_dofs]
        return z

    apply_transpose = apply

    def _view_body(self, indent):
        pad = " " * indent
        np_ = len(self.patch_dofs)
        sizes = [len(p) for p in self.patch_dofs]
        return [f"{pad}patches={np_}, max_patch={max(sizes) if sizes else 0}, "
                f"coarse_dofs={self.P.shape[1]}, "
                f"store_operators={self.store_operators}"]
