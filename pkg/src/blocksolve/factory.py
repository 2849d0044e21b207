"""Options-driven construction of nested solver trees.

`build_ksp(db, prefix, A)` reads `<prefix>ksp_*` and `<prefix>pc_*`
options and recursively builds the whole solver: every composite
preconditioner derives the prefixes of its inner solvers from its own
(`fieldsplit_0_`, `pcd_Mp_`, `assembled_`, ...), so a single flat option
table describes an arbitrarily deep tree.

A small translation layer accepts option files written for the PETSc
option dialect: `python` preconditioner indirection is mapped onto the
first-class types here, algebraic-multigrid types and external direct
factorizations are mapped to locally available equivalents, with a
warning naming the substitution.
"""

from __future__ import annotations

import sys
import warnings

import numpy as np

from .krylov import KSP, Nullspace
from .precond import (NonePC, JacobiPC, SORPC, LUPC, ILUPC, KSPPC,
                      AssembledPC, TelescopePC, FieldSplitPC, PCDPC,
                      MassSchurPC, SchwarzPC)

__all__ = ["build_ksp", "build_pc", "UnknownType", "report_unused"]

PC_TYPES = ("none", "jacobi", "sor", "lu", "ilu", "ksp", "assembled",
            "telescope", "fieldsplit", "pcd", "mass", "schwarz")

# foreign solver components accepted for compatibility and realised by a
# locally available equivalent
_PC_ALIASES = {"hypre": "lu", "gamg": "lu", "ml": "lu", "icc": "ilu",
               "cholesky": "lu", "bjacobi": "jacobi"}

_PYTHON_PC_MAP = {"pcd": "pcd", "assembled": "assembled",
                  "schwarz": "schwarz", "ssc": "schwarz",
                  "patch": "schwarz", "mass": "mass"}


class UnknownType(Exception):
    pass


def _warn_alias(prefix, asked, used):
    warnings.warn(f"option -{prefix}pc_type {asked}: not available, "
                  f"using '{used}' instead", stacklevel=2)


def _resolve_pc_type(db, prefix, default):
    asked = db.get(prefix + "pc_type", default)
    if asked == "python":
        target = db.get(prefix + "pc_python_type", "")
        low = target.lower()
        for token, local in _PYTHON_PC_MAP.items():
            if token in low:
                _warn_alias(prefix, f"python ({target})", local)
                return local
        raise UnknownType(
            f"option -{prefix}pc_python_type {target!r}: cannot map onto a "
            f"local preconditioner; known types: {', '.join(PC_TYPES)}")
    if asked in _PC_ALIASES:
        used = _PC_ALIASES[asked]
        _warn_alias(prefix, asked, used)
        return used
    if asked not in PC_TYPES:
        raise UnknownType(f"option -{prefix}pc_type {asked!r}: known types: "
                          f"{', '.join(PC_TYPES)}")
    return asked


def build_ksp(db, prefix, A, Apc=None, nullspace=None, monitor=None,
              default_type="gmres", default_pc=None):
    """KSP configured from `<prefix>ksp_*` options with its (recursively
    built) preconditioner set up against A (or Apc when given)."""
    o = db.scoped(prefix)
    ksp_type = o.get("ksp_type", default_type)
    side = o.get("ksp_pc_side")
    ortho = ("modified" if o.get_bool("ksp_gmres_modifiedgramschmidt")
             else "classical")
    if nullspace is None and o.get_bool("ksp_constant_nullspace"):
        nullspace = Nullspace([np.ones(A.shape[1])])
    if monitor is None and o.get_bool("ksp_monitor"):
        monitor = lambda line: print(line, file=sys.stdout)
    pc = build_pc(db, prefix, A, Apc, default_pc=default_pc)
    return KSP(ksp_type,
               rtol=o.get_float("ksp_rtol", 1e-5),
               atol=o.get_float("ksp_atol", 1e-50),
               max_it=o.get_int("ksp_max_it", 10000),
               restart=o.get_int("ksp_gmres_restart", 30),
               orthogonalization=ortho,
               side=side,
               pc=pc,
               nullspace=nullspace,
               monitor=monitor,
               prefix=prefix,
               error_if_not_converged=o.get_bool(
                   "ksp_error_if_not_converged"))


def build_pc(db, prefix, A, Apc=None, default_pc=None):
    """Preconditioner configured from `<prefix>pc_*` options, set up."""
    o = db.scoped(prefix)
    if default_pc is None:
        default_pc = "jacobi" if hasattr(A, "A") else "none"
    pc_type = _resolve_pc_type(db, prefix, default_pc)
    op = Apc if Apc is not None else A

    if pc_type == "none":
        pc = NonePC(prefix=prefix)
    elif pc_type == "jacobi":
        pc = JacobiPC(prefix=prefix)
    elif pc_type == "sor":
        pc = SORPC(omega=o.get_float("pc_sor_omega", 1.0),
                   its=o.get_int("pc_sor_its", 1),
                   symmetric=o.get_bool("pc_sor_symmetric", True),
                   prefix=prefix)
    elif pc_type == "lu":
        solver = o.get("pc_factor_mat_solver_type",
                       o.get("pc_factor_mat_solver_package"))
        if solver not in (None, "default"):
            warnings.warn(f"option -{prefix}pc_factor_mat_solver_type "
                          f"{solver}: using the built-in sparse LU")
        pc = LUPC(prefix=prefix)
    elif pc_type == "ilu":
        pc = ILUPC(drop_tol=o.get_float("pc_factor_drop_tol", 1e-4),
                   fill_factor=o.get_float("pc_factor_fill", 10.0),
                   prefix=prefix)
    elif pc_type == "ksp":
        pc = KSPPC(ksp_maker=lambda sub: build_ksp(
            db, prefix + "ksp_", sub, default_type="gmres"), prefix=prefix)
    elif pc_type == "assembled":
        pc = AssembledPC(inner_maker=lambda sub: build_pc(
            db, prefix + "assembled_", sub, default_pc="lu"), prefix=prefix)
    elif pc_type == "telescope":
        pc = TelescopePC(inner_maker=lambda sub: build_pc(
            db, prefix + "telescope_", sub), prefix=prefix)
    elif pc_type == "fieldsplit":
        splits = _read_splits(db, prefix)
        pc = FieldSplitPC(
            splits=splits,
            fs_type=o.get("pc_fieldsplit_type", "additive"),
            fact_type=o.get("pc_fieldsplit_schur_fact_type", "full"),
            sub_ksp_maker=lambda i, sub: build_ksp(
                db, f"{prefix}fieldsplit_{i}_", sub,
                default_type="preonly", default_pc=None),
            prefix=prefix)
    elif pc_type == "pcd":
        pc = PCDPC(
            mp_maker=lambda sub: build_ksp(
                db, prefix + "pcd_Mp_", sub,
                default_type="preonly", default_pc="lu"),
            kp_maker=lambda sub: build_ksp(
                db, prefix + "pcd_Kp_", sub,
                default_type="preonly", default_pc="lu"),
            prefix=prefix)
    elif pc_type == "mass":
        pc = MassSchurPC(
            mp_maker=lambda sub: build_ksp(
                db, prefix + "mass_", sub,
                default_type="preonly", default_pc="lu"),
            prefix=prefix)
    elif pc_type == "schwarz":
        pc = SchwarzPC(store_operators=o.get_bool(
            "pc_schwarz_store_operators", True), prefix=prefix)
    else:  # pragma: no cover - guarded by _resolve_pc_type
        raise UnknownType(pc_type)
    return pc.set_up(A, Apc)


def _read_splits(db, prefix):
    splits = []
    i = 0
    while True:
        v = db.get(f"{prefix}pc_fieldsplit_{i}_fields")
        if v is None:
            break
        splits.append(tuple(int(t) for t in v.split(",")))
        i += 1
    return splits or None


def report_unused(db, stream=None):
    stream = sys.stderr if stream is None else stream
    unused = db.unused()
    if unused:
        print("WARNING: unused options:", file=stream)
        for k in unused:
            print(f"  -{k} {db._values[k]}", file=stream)
    return unused
