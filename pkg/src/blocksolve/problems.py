"""Problem drivers: configuration dataclasses plus run functions.

Each driver builds the discrete problem, constructs its solver from the
option table, runs it, and returns a result dictionary.  The command
line front end is a thin wrapper around these.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass

import numpy as np

from .factory import build_ksp
from .forms import (cell_geometry, SpaceEval, stiffness_form,
                    ns_jacobian_form, rb_jacobian_form, load_vector,
                    ns_residual, rb_residual)
from .krylov import Nullspace
from .mesh import build_unit_square, build_unit_cube
from .newton import NewtonSolver
from .operators import ImplicitOperator
from .precond import view_ksp
from .quadrature import make_quadrature, MAX_DEGREE
from .spaces import (build_space, taylor_hood, MixedSpace, DirichletBC,
                     interpolate)

__all__ = ["PoissonConfig", "CavityConfig", "ConvectionConfig",
           "BenchConfig", "run_poisson", "run_cavity", "run_convection",
           "run_bench", "l2_error", "poisson_mms"]


def _show_view(db, ksp, stdout):
    """Honor -ksp_view; a non-boolean value names an output file."""
    v = db.get("ksp_view")
    if v is None:
        return
    text = view_ksp(ksp)
    if v.lower() in ("true", "yes", "on", "1"):
        print(text, file=stdout)
    else:
        with open(v, "w") as fh:
            fh.write(text + "\n")


def _mesh(dim, n):
    if dim == 2:
        return build_unit_square(n)
    if dim == 3:
        return build_unit_cube(n)
    raise ValueError(f"dimension must be 2 or 3, got {dim}")


def l2_error(space, x, exact, quad_degree=None):
    """L2 distance between a scalar finite element function and a
    callable, by quadrature."""
    mesh = space.mesh
    if quad_degree is None:
        quad_degree = min(2 * space.element.degree + 2, MAX_DEGREE)
    rule = make_quadrature(mesh.dim, quad_degree)
    geom = cell_geometry(mesh)
    ev = SpaceEval(space, geom, rule)
    uh = ev.function_values(x)
    pts = geom.physical_points(rule)
    ue = np.apply_along_axis(exact, 2, pts)
    wq = rule.weights[None, :] * geom.detJ[:, None]
    return float(np.sqrt(np.sum(wq * (uh - ue) ** 2)))


def poisson_mms(dim, kappa=1.0):
    """Manufactured solution prod(sin(pi x_i)) with its forcing."""
    def exact(x):
        return float(np.prod(np.sin(np.pi * np.asarray(x))))

    def forcing(x):
        return kappa * dim * np.pi ** 2 * exact(x)

    return exact, forcing


@dataclass
class PoissonConfig:
    n: int = 8
    dim: int = 2
    degree: int = 1
    kappa: float = 1.0
    mms: bool = False


def run_poisson(cfg, db, stdout=sys.stdout):
    """Dirichlet Poisson problem -div(kappa grad u) = f on the unit box."""
    mesh = _mesh(cfg.dim, cfg.n)
    V = build_space(mesh, cfg.degree)
    bc = DirichletBC(V, tuple(range(1, 2 * cfg.dim + 1)), value=0.0)
    form = stiffness_form(V, kappa=cfg.kappa)
    if cfg.mms:
        exact, forcing = poisson_mms(cfg.dim, cfg.kappa)
    else:
        exact, forcing = None, 1.0
    b = load_vector(form, forcing)
    b[bc.dofs] = bc.values

    implicit = ImplicitOperator(form, bcs=[bc])
    mat_type = db.get("mat_type", "matfree")
    A = implicit if mat_type == "matfree" else implicit.assemble()
    pmat_type = db.get("pmat_type", mat_type)
    Apc = A if pmat_type == mat_type else (
        implicit if pmat_type == "matfree" else implicit.assemble())

    ksp = build_ksp(db, "", A, Apc, default_type="cg")
    _show_view(db, ksp, stdout)
    x, report = ksp.solve(A, b)

    out = {"mesh": mesh, "space": V, "solution": x, "report": report,
           "ksp": ksp, "dofs": V.num_dofs, "operator": A}
    if exact is not None:
        out["l2_error"] = l2_error(V, x, exact)
    return out


@dataclass
class CavityConfig:
    n: int = 8
    re: float = 100.0
    degree: int = 2


def _newton_from_options(db, resid, form, bcs, nullspace, stdout,
                         default_mat="aij"):
    monitor = None
    if db.get_bool("snes_monitor"):
        monitor = lambda line: print(line, file=stdout)
    mat_type = db.get("mat_type", default_mat)
    pmat_type = db.get("pmat_type", mat_type)
    shown = []

    def maker(A, Apc):
        ksp = build_ksp(db, "", A, Apc,
                        default_type="preonly", default_pc="lu")
        if not shown:
            shown.append(True)
            _show_view(db, ksp, stdout)
        return ksp

    return NewtonSolver(resid, form, bcs, ksp_maker=maker,
                        rtol=db.get_float("snes_rtol", 1e-8),
                        atol=db.get_float("snes_atol", 1e-50),
                        max_it=db.get_int("snes_max_it", 50),
                        mat_type=mat_type, pmat_type=pmat_type,
                        nullspace=nullspace, monitor=monitor,
                        error_if_not_converged=db.get_bool(
                            "snes_error_if_not_converged"))


def run_cavity(cfg, db, stdout=sys.stdout):
    """Lid-driven cavity for steady Navier-Stokes: unit box, unit
    tangential velocity on the top wall, no-slip elsewhere."""
    mesh = _mesh(2, cfg.n)
    W = taylor_hood(mesh, cfg.degree)

    def lid(x):
        return [1.0, 0.0] if abs(x[1] - 1.0) < 1e-12 else [0.0, 0.0]

    bcs = [DirichletBC(W.fields[0], (1, 2, 3, 4), value=lid, field=0)]
    form = ns_jacobian_form(W, Re=cfg.re)
    resid = lambda x: ns_residual(form, x, bcs)
    nsv = np.zeros(W.num_dofs)
    nsv[W.field_slice(1)] = 1.0
    snes = _newton_from_options(db, resid, form, bcs, Nullspace([nsv]),
                                stdout)
    x, report = snes.solve()
    return {"mesh": mesh, "space": W, "solution": x, "report": report,
            "dofs": W.num_dofs}


@dataclass
class ConvectionConfig:
    n: int = 8
    dim: int = 2
    ra: float = 200.0
    pr: float = 6.18


def run_convection(cfg, db, stdout=sys.stdout):
    """Steady buoyancy-driven convection in a laterally heated unit box:
    no-slip walls, hot (T=1) at x=0, cold (T=0) at x=1, insulated
    elsewhere."""
    mesh = _mesh(cfg.dim, cfg.n)
    V = build_space(mesh, 2, ncomp=cfg.dim)
    Q = build_space(mesh, 1)
    T = build_space(mesh, 1)
    W = MixedSpace([V, Q, T])
    walls = tuple(range(1, 2 * cfg.dim + 1))
    bcs = [DirichletBC(V, walls, value=[0.0] * cfg.dim, field=0),
           DirichletBC(T, (1,), value=1.0, field=2),
           DirichletBC(T, (2,), value=0.0, field=2)]
    form = rb_jacobian_form(W, Ra=cfg.ra, Pr=cfg.pr)
    resid = lambda x: rb_residual(form, x, bcs)
    nsv = np.zeros(W.num_dofs)
    nsv[W.field_slice(1)] = 1.0
    snes = _newton_from_options(db, resid, form, bcs, Nullspace([nsv]),
                                stdout)
    x0 = np.zeros(W.num_dofs)
    # start from the conducting state so the energy residual is small
    x0[W.field_slice(2)] = interpolate(T, lambda p: 1.0 - p[0])
    x, report = snes.solve(x0)
    return {"mesh": mesh, "space": W, "solution": x, "report": report,
            "dofs": W.num_dofs}


@dataclass
class BenchConfig:
    n: int = 16
    dim: int = 2
    degrees: tuple = (1, 2, 3, 4)
    repeats: int = 5


def run_bench(cfg, db, stdout=sys.stdout):
    """Matrix-free versus assembled matvec micro-benchmark, CSV rows."""
    rows = []
    print("problem,dim,degree,dofs,mode,dofs_per_sec,bytes_per_dof,"
          "flops_per_apply", file=stdout)
    for degree in cfg.degrees:
        mesh = _mesh(cfg.dim, cfg.n)
        V = build_space(mesh, degree)
        bc = DirichletBC(V, tuple(range(1, 2 * cfg.dim + 1)))
        implicit = ImplicitOperator(stiffness_form(V), bcs=[bc])
        rng = np.random.default_rng(12345)
        x = rng.standard_normal(V.num_dofs)
        for mode in ("matfree", "assembled"):
            op = implicit if mode == "matfree" else implicit.assemble()
            op.apply(x)  # warm caches before timing
            t0 = time.perf_counter()
            for _ in range(cfg.repeats):
                op.apply(x)
            dt = (time.perf_counter() - t0) / cfg.repeats
            row = {"problem": "poisson", "dim": cfg.dim, "degree": degree,
                   "dofs": V.num_dofs,
                   "mode": mode,
                   "dofs_per_sec": V.num_dofs / dt if dt > 0 else float("inf"),
                   "bytes_per_dof": op.memory_footprint() / V.num_dofs,
                   "flops_per_apply": op.flops_per_apply()}
            rows.append(row)
            print("{problem},{dim},{degree},{dofs},{mode},"
                  "{dofs_per_sec:.6g},{bytes_per_dof:.6g},"
                  "{flops_per_apply}".format(**row), file=stdout)
    return rows
