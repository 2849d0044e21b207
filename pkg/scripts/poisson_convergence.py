#!/usr/bin/env python3
"""Manufactured-solution convergence rates for the Poisson driver."""

import argparse

import numpy as np

from blocksolve.options import OptionsDB
from blocksolve.problems import PoissonConfig, run_poisson


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--degrees", default="1,2,3")
    ap.add_argument("--ns", default="8,16,32")
    ap.add_argument("--dim", type=int, default=2)
    args = ap.parse_args()

    for degree in (int(d) for d in args.degrees.split(",")):
        print(f"# degree {degree}")
        print("n,dofs,l2_error,rate")
        prev = None
        for n in (int(n) for n in args.ns.split(",")):
            db = OptionsDB().parse_args(["-ksp_rtol", "1e-12",
                                         "-mat_type", "aij",
                                         "-pc_type", "lu",
                                         "-ksp_type", "preonly"])
            res = run_poisson(PoissonConfig(n=n, dim=args.dim,
                                            degree=degree, mms=True), db)
            err = res["l2_error"]
            rate = "" if prev is None else f"{np.log2(prev / err):.2f}"
            print(f"{n},{res['dofs']},{err:.6e},{rate}")
            prev = err


if __name__ == "__main__":
    main()
