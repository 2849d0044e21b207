"""Krylov and stationary iterative solvers with a preconditioner slot.

Convergence is declared on the preconditioned residual norm for left
preconditioning and on the true residual norm for right/flexible
preconditioning.  A registered nullspace is projected out of the right-hand
side, of every operator application, and of every preconditioned direction.
"""

from __future__ import annotations

import numpy as np

__all__ = ["KSP", "SolveReport", "Nullspace", "KrylovError",
           "DivergedMaxIts", "DivergedNaN", "IndefiniteOperator"]

KSP_TYPES = ("cg", "gmres", "fgmres", "richardson", "preonly")


class KrylovError(Exception):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DivergedMaxIts(KrylovError):
    pass


class DivergedNaN(KrylovError):
    pass


class IndefiniteOperator(KrylovError):
    pass


class SolveReport:
    def __init__(self, converged, reason, iterations, residual_norm,
                 true_residual_norm=None):
        self.converged = converged
        self.reason = reason
        self.iterations = iterations
        self.residual_norm = residual_norm
        self.true_residual_norm = true_residual_norm

    def __repr__(self):
        tag = "converged" if self.converged else "diverged"
        return (f"SolveReport({tag} {self.reason}, its={self.iterations}, "
                f"rnorm={self.residual_norm:.6e})")


class Nullspace:
    """Orthonormalised set of vectors to project out of a solve."""

    def __init__(self, vectors):
        basis = []
        for v in vectors:
            v = np.array(v, dtype=float)
            for u in basis:
                v -= np.dot(u, v) * u
            n = np.linalg.norm(v)
            if n > 1e-14:
                basis.append(v / n)
        self.basis = basis

    def project(self, v):
        for u in self.basis:
            v = v - np.dot(u, v) * u
        return v


class KSP:
    """Iterative solver context: type, tolerances, preconditioner, monitor."""

    def __init__(self, ksp_type="gmres", rtol=1e-5, atol=1e-50, max_it=10000,
                 restart=30, orthogonalization="classical", side=None,
                 pc=None, nullspace=None, monitor=None, prefix="",
                 error_if_not_converged=False):
        if ksp_type not in KSP_TYPES:
            raise ValueError(f"unknown ksp type {ksp_type!r}; "
                             f"known: {', '.join(KSP_TYPES)}")
        if rtol < 0 or atol < 0 or restart < 1:
            raise ValueError("tolerances must be nonnegative, restart >= 1")
        self.type = ksp_type
        self.rtol = rtol
        self.atol = atol
        self.max_it = max_it
        self.restart = restart
        self.orthogonalization = orthogonalization
        if side is None:
            side = "right" if ksp_type == "fgmres" else "left"
        self.side = side
        self.pc = pc
        self.nullspace = nullspace
        self.monitor = monitor
        self.prefix = prefix
        self.error_if_not_converged = error_if_not_converged
        self.last_report = None

    # -- helpers ----------------------------------------------------------

    def _project(self, v):
        if self.nullspace is not None:
            return self.nullspace.project(v)
        return v

    def _apply_pc(self, r):
        if self.pc is None:
            z = r.copy()
        else:
            z = self.pc.apply(r)
        return self._project(z)

    def _apply_op(self, A, v):
        return self._project(A.apply(v))

    def _monitor(self, it, rnorm):
        if self.monitor is not None:
            self.monitor(f"  {it} KSP Residual norm {rnorm:.12e}")

    def _check_nan(self, rnorm, it):
        if not np.isfinite(rnorm):
            raise DivergedNaN(
                f"{self.prefix or 'ksp'}: non-finite residual at iteration {it}",
                SolveReport(False, "diverged_nan", it, rnorm))

    def _finish(self, x, converged, reason, it, rnorm, A, b):
        true_norm = np.linalg.norm(b - A.apply(x))
        report = SolveReport(converged, reason, it, rnorm, true_norm)
        self.last_report = report
        if not converged and self.error_if_not_converged:
            raise DivergedMaxIts(
                f"{self.prefix or 'ksp'}: {reason} after {it} iterations "
                f"(residual {rnorm:.3e})", report)
        return x, report

    # -- drivers ----------------------------------------------------------

    def solve(self, A, b, x0=None):
        b = self._project(np.asarray(b, dtype=float))
        x0 = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
        method = getattr(self, "_solve_" + self.type)
        return method(A, b, x0)

    def _solve_preonly(self, A, b, x0):
        x = self._apply_pc(b)
        rnorm = np.linalg.norm(b - A.apply(x))
        self._monitor(0, rnorm)
        return self._finish(x, True, "preonly", 1, rnorm, A, b)

    def _solve_richardson(self, A, b, x0):
        x = x0
        r = b - self._apply_op(A, x)
        rnorm0 = rnorm = np.linalg.norm(self._apply_pc(r) if self.side == "left" else r)
        self._monitor(0, rnorm)
        tol = max(self.rtol * rnorm0, self.atol)
        for it in range(1, self.max_it + 1):
            x = x + self._apply_pc(r)
            r = b - self._apply_op(A, x)
            rnorm = np.linalg.norm(self._apply_pc(r) if self.side == "left" else r)
            self._check_nan(rnorm, it)
            self._monitor(it, rnorm)
            if rnorm <= tol:
                return self._finish(x, True, "rtol", it, rnorm, A, b)
        return self._finish(x, False, "max_its", self.max_it, rnorm, A, b)

    def _solve_cg(self, A, b, x0):
        x = x0
        r = b - self._apply_op(A, x)
        z = self._apply_pc(r)
        rz = np.dot(r, z)
        rnorm0 = rnorm = np.sqrt(abs(rz))
        self._monitor(0, rnorm)
        tol = max(self.rtol * rnorm0, self.atol)
        if rnorm0 <= self.atol:
            return self._finish(x, True, "atol", 0, rnorm, A, b)
        p = z
        for it in range(1, self.max_it + 1):
            Ap = self._apply_op(A, p)
            pAp = np.dot(p, Ap)
            if pAp <= 0:
                raise IndefiniteOperator(
                    f"{self.prefix or 'ksp'}: indefinite operator in CG "
                    f"(pAp = {pAp:.3e})",
                    SolveReport(False, "indefinite_operator", it, rnorm))
            alpha = rz / pAp
            x = x + alpha * p
            r = r - alpha * Ap
            z = self._apply_pc(r)
            rz_new = np.dot(r, z)
            if rz_new < 0:
                raise IndefiniteOperator(
                    f"{self.prefix or 'ksp'}: indefinite preconditioner in CG",
                    SolveReport(False, "indefinite_pc", it, rnorm))
            rnorm = np.sqrt(rz_new)
            self._check_nan(rnorm, it)
            self._monitor(it, rnorm)
            if rnorm <= tol:
                return self._finish(x, True, "rtol", it, rnorm, A, b)
            beta = rz_new / rz
            rz = rz_new
            p = z + beta * p
        return self._finish(x, False, "max_its", self.max_it, rnorm, A, b)

    def _solve_gmres(self, A, b, x0):
        return self._gmres(A, b, x0, flexible=False)

    def _solve_fgmres(self, A, b, x0):
        return self._gmres(A, b, x0, flexible=True)

    def _gmres(self, A, b, x0, flexible):
        left = self.side == "left" and not flexible
        x = x0
        total_it = 0
        rnorm0 = None
        while True:
            r = b - self._apply_op(A, x)
            if left:
                r = self._apply_pc(r)
            beta = np.linalg.norm(r)
            self._check_nan(beta, total_it)
            if rnorm0 is None:
                rnorm0 = beta
                tol = max(self.rtol * rnorm0, self.atol)
                self._monitor(0, beta)
                if beta <= self.atol:
                    return self._finish(x, True, "atol", 0, beta, A, b)
            if beta <= tol:
                return self._finish(x, True, "rtol", total_it, beta, A, b)
            if total_it >= self.max_it:
                return self._finish(x, False, "max_its", total_it, beta, A, b)

            m = self.restart
            V = [r / beta]
            Z = []
            H = np.zeros((m + 1, m))
            g = np.zeros(m + 1)
            g[0] = beta
            cs = np.zeros(m)
            sn = np.zeros(m)
            k = 0
            while k < m and total_it < self.max_it:
                if left:
                    w = self._apply_pc(self._apply_op(A, V[k]))
                else:
                    z = self._apply_pc(V[k])
                    Z.append(z)
                    w = self._apply_op(A, z)
                if self.orthogonalization == "modified":
                    for i in range(k + 1):
                        H[i, k] = np.dot(V[i], w)
                        w = w - H[i, k] * V[i]
                else:
                    h = np.array([np.dot(v, w) for v in V[:k + 1]])
                    H[:k + 1, k] = h
                    w = w - sum(h[i] * V[i] for i in range(k + 1))
                H[k + 1, k] = np.linalg.norm(w)
                if H[k + 1, k] > 1e-300:
                    V.append(w / H[k + 1, k])
                else:
                    V.append(w)
                # Givens rotations
                for i in range(k):
                    t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                    H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                    H[i, k] = t
                denom = np.hypot(H[k, k], H[k + 1, k])
                cs[k] = H[k, k] / denom if denom else 1.0
                sn[k] = H[k + 1, k] / denom if denom else 0.0
                H[k, k] = denom
                H[k + 1, k] = 0.0
                g[k + 1] = -sn[k] * g[k]
                g[k] = cs[k] * g[k]
                k += 1
                total_it += 1
                rnorm = abs(g[k])
                self._check_nan(rnorm, total_it)
                self._monitor(total_it, rnorm)
                if rnorm <= tol:
                    break
            # assemble update
            y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
            if left:
                dx = sum(y[i] * V[i] for i in range(k))
            else:
                dx = sum(y[i] * Z[i] for i in range(k))
            if k:
                x = x + dx
                x = self._project(x) if self.nullspace is not None else x
            rnorm = abs(g[k]) if k else beta
            if rnorm <= tol:
                # recompute outside the loop to confirm and report
                continue
            if total_it >= self.max_it:
                r = b - self._apply_op(A, x)
                if left:
                    r = self._apply_pc(r)
                return self._finish(x, False, "max_its", total_it,
                                    np.linalg.norm(r), A, b)
