"""Command line front end.

Driver arguments (mesh size, physical parameters) are ordinary flags;
everything after a literal `--` is handed to the solver option table, so
any nested solver can be reconfigured from the shell:

    blocksolve poisson --n 32 --degree 2 -- -ksp_type cg -pc_type schwarz
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .factory import report_unused
from .mesh import Mesh  # noqa: F401  (re-export for scripting)
from .operators import write_matrix_market
from .options import OptionsDB
from .problems import (PoissonConfig, CavityConfig, ConvectionConfig,
                       BenchConfig, run_poisson, run_cavity,
                       run_convection, run_bench)

__all__ = ["main"]


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="blocksolve",
        description="Composable block preconditioning test problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("poisson", help="variable-coefficient Poisson solve")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--mms", action="store_true",
                   help="manufactured solution with L2 error report")
    p.add_argument("--table", action="store_true",
                   help="refine n, 2n, 4n and print convergence rates")
    p.add_argument("--export-matrix", metavar="FILE",
                   help="write the assembled matrix in MatrixMarket format")
    p.add_argument("--export-mesh", metavar="FILE",
                   help="write the mesh as text")

    ns = sub.add_parser("navier-stokes", help="lid-driven cavity")
    ns.add_argument("--n", type=int, default=8)
    ns.add_argument("--re", type=float, default=100.0)
    ns.add_argument("--degree", type=int, default=2)

    rb = sub.add_parser("rayleigh-benard",
                        help="buoyancy-driven convection")
    rb.add_argument("--n", type=int, default=8)
    rb.add_argument("--dim", type=int, default=2, choices=(2, 3))
    rb.add_argument("--ra", type=float, default=200.0)
    rb.add_argument("--pr", type=float, default=6.18)

    bench = sub.add_parser("bench-matvec",
                           help="matrix-free vs assembled matvec benchmark")
    bench.add_argument("--n", type=int, default=16)
    bench.add_argument("--dim", type=int, default=2, choices=(2, 3))
    bench.add_argument("--degrees", type=str, default="1,2,3,4")
    bench.add_argument("--repeats", type=int, default=5)

    for sp in (p, ns, rb, bench):
        sp.add_argument("--options-file", action="append", default=[],
                        metavar="FILE", help="read solver options from FILE")
    return parser


def _split_argv(argv):
    if "--" in argv:
        i = argv.index("--")
        return argv[:i], argv[i + 1:]
    return argv, []


def _poisson(args, db, stdout):
    cfg = PoissonConfig(n=args.n, dim=args.dim, degree=args.degree,
                        kappa=args.kappa, mms=args.mms or args.table)
    if args.table:
        prev = None
        print("n,dofs,l2_error,rate", file=stdout)
        ok = True
        for n in (cfg.n, 2 * cfg.n, 4 * cfg.n):
            res = run_poisson(PoissonConfig(n=n, dim=cfg.dim,
                                            degree=cfg.degree,
                                            kappa=cfg.kappa, mms=True), db)
            ok = ok and res["report"].converged
            err = res["l2_error"]
            rate = "" if prev is None else f"{np.log2(prev / err):.2f}"
            print(f"{n},{res['dofs']},{err:.6e},{rate}", file=stdout)
            prev = err
        return ok
    res = run_poisson(cfg, db, stdout=stdout)
    rep = res["report"]
    line = (f"poisson: dofs={res['dofs']} its={rep.iterations} "
            f"rnorm={rep.residual_norm:.6e}")
    if "l2_error" in res:
        line += f" l2_error={res['l2_error']:.6e}"
    print(line, file=stdout)
    if args.export_matrix:
        with open(args.export_matrix, "w") as fh:
            write_matrix_market(res["operator"].assemble().A, fh)
    if args.export_mesh:
        with open(args.export_mesh, "w") as fh:
            fh.write(res["mesh"].export_text())
    return rep.converged


def _navier_stokes(args, db, stdout):
    res = run_cavity(CavityConfig(n=args.n, re=args.re,
                                  degree=args.degree), db, stdout=stdout)
    rep = res["report"]
    print(f"navier-stokes: dofs={res['dofs']} newton_its={rep.iterations} "
          f"linear_its={rep.linear_iterations} "
          f"rnorm={rep.residual_norm:.6e}", file=stdout)
    return rep.converged


def _rayleigh_benard(args, db, stdout):
    res = run_convection(ConvectionConfig(n=args.n, dim=args.dim,
                                          ra=args.ra, pr=args.pr),
                         db, stdout=stdout)
    rep = res["report"]
    print(f"rayleigh-benard: dofs={res['dofs']} "
          f"newton_its={rep.iterations} "
          f"linear_its={rep.linear_iterations} "
          f"rnorm={rep.residual_norm:.6e}", file=stdout)
    return rep.converged


def _bench(args, db, stdout):
    degrees = tuple(int(d) for d in args.degrees.split(","))
    run_bench(BenchConfig(n=args.n, dim=args.dim, degrees=degrees,
                          repeats=args.repeats), db, stdout=stdout)
    return True


def main(argv=None, stdout=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    stdout = sys.stdout if stdout is None else stdout
    driver_argv, option_argv = _split_argv(argv)
    parser = _build_parser()
    args = parser.parse_args(driver_argv)

    db = OptionsDB()
    for path in args.options_file:
        db.parse_file(path)
    db.parse_args(option_argv)

    handlers = {"poisson": _poisson, "navier-stokes": _navier_stokes,
                "rayleigh-benard": _rayleigh_benard,
                "bench-matvec": _bench}
    ok = handlers[args.command](args, db, stdout)
    report_unused(db)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
