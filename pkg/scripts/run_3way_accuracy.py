#!/usr/bin/env python3
"""Order-3 accuracy study: envelope estimators vs entrywise least squares.

Runs seeded replications of the (20, 30, 40) response / 5-predictor design
at two sample sizes and prints an accuracy table (mean squared coefficient
error with standard errors).  Expect the envelope error to sit one to two
orders of magnitude below the entrywise error, shrinking roughly like 1/n.
"""

import argparse
import csv
import sys

from tenvreg.estimators import FitOptions
from tenvreg.simulation import ScenarioConfig, run_replications


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=25)
    ap.add_argument("--seed", type=int, default=20250809)
    ap.add_argument("--sizes", default="100,400", help="comma list of sample sizes")
    ap.add_argument("--snr", type=float, default=0.1)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args(argv)

    estimators = ("ols", "env-iterative", "env-onestep")
    rows = []
    for n in (int(s) for s in args.sizes.split(",")):
        config = ScenarioConfig(
            dims=(20, 30, 40), p=5, n=n, snr=args.snr, sigma0_sq=1.0,
            u=(2, 3, 4), reps=args.reps, seed=args.seed,
        )
        summaries = run_replications(config, estimators, fit_options=FitOptions())
        for name in estimators:
            s = summaries[name]
            se = float("nan") if s.stderr is None else s.stderr
            rows.append((n, name, s.mean_error, se, len(s.errors), s.failures))
            print(f"n={n:4d}  {name:14s}  mean error {s.mean_error:12.5g}  se {se:9.3g}  "
                  f"({len(s.errors)} reps, {s.failures} failures)")

    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "estimator", "mean_error", "stderr", "reps", "failures"])
            w.writerows(rows)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
