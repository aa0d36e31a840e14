#!/usr/bin/env python3
"""Image-shape recovery grid: 64x64 two-group responses at several
signal-to-noise ratios.

For each (shape, snr) cell this fits the entrywise and envelope estimators
on seeded replications, reports relative coefficient errors, and writes PGM
panels (truth / entrywise / envelope) for the first replication so the
recovery can be inspected visually.
"""

import argparse
import os
import sys

import numpy as np

from tenvreg.estimators import fit_iterative, ols_fit
from tenvreg.fileio import render_to_bytes, write_pgm
from tenvreg.simulation import ScenarioConfig, ShapeSpec, generate_scenario

SHAPE_DIMS = {"square": 1, "cross": 2, "disk": 8}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shapes", default="square,cross")
    ap.add_argument("--snrs", default="0.1,1")
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=777)
    ap.add_argument("--out", default="shape_recovery_out")
    args = ap.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    for kind in args.shapes.split(","):
        u = SHAPE_DIMS[kind]
        for snr in (float(s) for s in args.snrs.split(",")):
            rel_ols, rel_env = [], []
            for rep in range(args.reps):
                config = ScenarioConfig(
                    dims=(64, 64), p=1, n=args.n, snr=snr, sigma0_sq=1.0, u=(u, u),
                    reps=args.reps, seed=args.seed, shape=ShapeSpec(kind=kind, size=64),
                )
                data, truth = generate_scenario(config, rep)
                fit_o = ols_fit(data)
                fit_e = fit_iterative(data, config.u)
                bn = np.linalg.norm(truth.b)
                rel_ols.append(np.linalg.norm(fit_o.b - truth.b) / bn)
                rel_env.append(np.linalg.norm(fit_e.b - truth.b) / bn)
                if rep == 0:
                    tag = f"{kind}_snr{snr:g}"
                    write_pgm(os.path.join(args.out, f"{tag}_truth.pgm"), render_to_bytes(truth.b[..., 0]))
                    write_pgm(os.path.join(args.out, f"{tag}_ols.pgm"), render_to_bytes(fit_o.b[..., 0]))
                    write_pgm(os.path.join(args.out, f"{tag}_env.pgm"), render_to_bytes(fit_e.b[..., 0]))
            print(
                f"{kind:6s} snr={snr:<5g} rel err: entrywise {np.mean(rel_ols):7.3f}  "
                f"envelope {np.mean(rel_env):7.3f}  (x{np.mean(rel_ols) / np.mean(rel_env):.1f} better)"
            )
    print(f"PGM panels in {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
