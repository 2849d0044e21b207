"""Newton's method over a residual callback and a Jacobian block form.

The solver lifts Dirichlet data onto the initial iterate, so Newton
corrections live in the homogeneous subspace and the unit-diagonal
Dirichlet rows of the Jacobian keep them there.  The Jacobian can be kept
matrix-free or assembled each step, independently for the operator the
Krylov method applies and the one the preconditioner is built from.
"""

from __future__ import annotations

import numpy as np

from .forms import collect_bc_values
from .krylov import KrylovError
from .operators import ImplicitOperator

__all__ = ["NewtonSolver", "NewtonReport", "NewtonError",
           "NewtonDivergedMaxIts", "LinearSolveFailed"]


class NewtonError(Exception):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NewtonDivergedMaxIts(NewtonError):
    pass


class LinearSolveFailed(NewtonError):
    pass


class NewtonReport:
    def __init__(self, converged, reason, iterations, linear_iterations,
                 residual_norms):
        self.converged = converged
        self.reason = reason
        self.iterations = iterations
        self.linear_iterations = linear_iterations
        self.residual_norms = list(residual_norms)

    @property
    def residual_norm(self):
        return self.residual_norms[-1]

    def __repr__(self):
        tag = "converged" if self.converged else "diverged"
        return (f"NewtonReport({tag} {self.reason}, its={self.iterations}, "
                f"linear_its={self.linear_iterations}, "
                f"rnorm={self.residual_norm:.6e})")


class NewtonSolver:
    """Newton iteration x <- x + d, J(x) d = -F(x).

    residual_fn(state) evaluates F with Dirichlet rows holding the
    boundary defect; jacobian_form is the block form of J, whose context
    state is updated before every linearisation.  ksp_maker(A, Apc)
    returns the linear solver for one Newton step (rebuilt per step so
    state-dependent preconditioners refresh)."""

    def __init__(self, residual_fn, jacobian_form, bcs=(), ksp_maker=None,
                 rtol=1e-8, atol=1e-50, max_it=50, mat_type="matfree",
                 pmat_type=None, nullspace=None, monitor=None,
                 error_if_not_converged=False):
        if mat_type not in ("matfree", "aij"):
            raise ValueError(f"unknown mat type {mat_type!r}")
        pmat_type = mat_type if pmat_type is None else pmat_type
        if pmat_type not in ("matfree", "aij"):
            raise ValueError(f"unknown pmat type {pmat_type!r}")
        self.residual_fn = residual_fn
        self.jacobian_form = jacobian_form
        self.bcs = tuple(bcs)
        self.ksp_maker = ksp_maker
        self.rtol = rtol
        self.atol = atol
        self.max_it = max_it
        self.mat_type = mat_type
        self.pmat_type = pmat_type
        self.nullspace = nullspace
        self.monitor = monitor
        self.error_if_not_converged = error_if_not_converged
        self.last_report = None

    def lift_bcs(self, x):
        """Impose the Dirichlet data on an iterate, in place."""
        space = self.jacobian_form.row_space
        if self.bcs:
            dofs, values = collect_bc_values(space, self.bcs)
            x[dofs] = values
        return x

    def _operators(self):
        implicit = ImplicitOperator(self.jacobian_form, bcs=self.bcs)
        A = implicit if self.mat_type == "matfree" else implicit.assemble()
        if self.pmat_type == self.mat_type:
            Apc = A
        else:
            Apc = implicit if self.pmat_type == "matfree" \
                else implicit.assemble()
        return A, Apc

    def _monitor(self, it, norm):
        if self.monitor is not None:
            self.monitor(f"{it} SNES Function norm {norm:.12e}")

    def _finish(self, x, converged, reason, it, linear_its, norms):
        report = NewtonReport(converged, reason, it, linear_its, norms)
        self.last_report = report
        if not converged and self.error_if_not_converged:
            raise NewtonDivergedMaxIts(
                f"newton: {reason} after {it} iterations "
                f"(residual {norms[-1]:.3e})", report)
        return x, report

    def solve(self, x0=None):
        form = self.jacobian_form
        n = form.col_space.num_dofs
        x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
        self.lift_bcs(x)
        norms = []
        linear_its = 0
        for it in range(self.max_it + 1):
            r = self.residual_fn(x)
            norm = float(np.linalg.norm(r))
            norms.append(norm)
            self._monitor(it, norm)
            if not np.isfinite(norm):
                return self._finish(x, False, "diverged_nan", it,
                                    linear_its, norms)
            if it == 0:
                tol = max(self.rtol * norm, self.atol)
            if norm <= tol:
                return self._finish(x, True, "rtol", it, linear_its, norms)
            if it == self.max_it:
                break
            form.context["state"] = x
            A, Apc = self._operators()
            ksp = self.ksp_maker(A, Apc) if self.ksp_maker else None
            if ksp is None:
                from .krylov import KSP
                from .precond import LUPC
                ksp = KSP("preonly",
                          pc=LUPC().set_up(A.assemble() if self.mat_type
                                           == "matfree" else A))
            if ksp.nullspace is None:
                ksp.nullspace = self.nullspace
            rhs = -r
            if ksp.nullspace is not None:
                rhs = ksp.nullspace.project(rhs)
            try:
                d, lin_report = ksp.solve(A, rhs)
            except KrylovError as err:
                raise LinearSolveFailed(
                    f"newton step {it}: linear solve failed ({err})",
                    NewtonReport(False, "linear_solve_failed", it,
                                 linear_its, norms)) from err
            linear_its += lin_report.iterations
            x = x + d
        return self._finish(x, False, "max_its", self.max_it,
                            linear_its, norms)
