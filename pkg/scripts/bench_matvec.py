#!/usr/bin/env python3
"""Matrix-free versus assembled operator application benchmark."""

import argparse
import sys

from blocksolve.options import OptionsDB
from blocksolve.problems import BenchConfig, run_bench


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--degrees", default="1,2,3,4")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    degrees = tuple(int(d) for d in args.degrees.split(","))
    run_bench(BenchConfig(n=args.n, dim=args.dim, degrees=degrees,
                          repeats=args.repeats), OptionsDB(),
              stdout=sys.stdout)


if __name__ == "__main__":
    main()
