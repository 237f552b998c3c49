"""Coverage tables for unpenalized GLMs (one block per family and sample size).

    python scripts/coverage_tables.py --families logistic gamma:1 --n 100 600 --reps 300 -B 500
"""

import argparse
import sys
import time
from pathlib import Path

from glmboot.inference import format_report, reports_to_csv
from glmboot.simulate import SimConfig, run_coverage_sim


def family_spec(text):
    name, _, shape = text.partition(":")
    return name, float(shape) if shape else None


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--families", nargs="+", type=family_spec,
                   default=[("logistic", None), ("poisson", None), ("gamma", 1.0), ("gamma", 3.0)])
    p.add_argument("--n", nargs="+", type=int, default=[100, 300, 600])
    p.add_argument("-d", type=int, default=6)
    p.add_argument("--reps", type=int, default=300)
    p.add_argument("-B", type=int, default=500)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv", type=Path, help="also write the machine-readable CSV here")
    args = p.parse_args(argv)

    reports = []
    for name, shape in args.families:
        for n in args.n:
            t = time.time()
            rep = run_coverage_sim(SimConfig(family=name, shape=shape, n=n, d=args.d, reps=args.reps, B=args.B,
                                             level=args.level, master_seed=args.seed, parallelism=args.threads))
            reports.append(rep)
            print(format_report(rep, args.level), f"\n({time.time() - t:.0f} s)\n", flush=True)
    if args.csv:
        args.csv.write_text(reports_to_csv(reports))
    return 0


if __name__ == "__main__":
    sys.exit(main())
