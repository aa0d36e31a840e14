"""Command-line surface: simulate, fit, pvalue, render, dimsweep, rank.

Exit codes: 0 success, 1 usage, 2 data/format problems, 3 numerical
failures.  Every command is deterministic given its flags and seed, and no
command mutates its inputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import fileio
from .covariance import CovarianceError, SeparableCovariance
from .estimators import (
    Dataset,
    EstimationError,
    FitOptions,
    FitResult,
    parameter_count,
)
from .inference import bh_fdr, pvalue_map, sample_sigma_x, threshold_map, u_ols
from .simulation import (
    ESTIMATORS,
    error_metric,
    generate_scenario,
    numerical_rank,
    run_replications,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TENV_THREADS", "1")))
    except ValueError:
        return 1


def _fit_options(args, base: FitOptions = None) -> FitOptions:
    """Fit options from flags; explicit flags override ``base`` (used for
    scenario-file settings), unset flags leave it alone."""
    opts = base or FitOptions()
    if args.tol is not None:
        opts.tol = args.tol
    if args.max_iter is not None:
        opts.max_iter = args.max_iter
    if args.starts is not None:
        opts.random_starts = args.starts
    if args.seed is not None:
        opts.seed = args.seed
    opts.center = not getattr(args, "no_center", False)
    return opts


def _add_fit_flags(sub):
    sub.add_argument("--tol", type=float, default=None, help="outer-loop relative objective tolerance (default 1e-6)")
    sub.add_argument("--max-iter", type=int, default=None, help="outer-loop iteration cap (default 50)")
    sub.add_argument("--starts", type=int, default=None, help="random basis starts per mode (default 3)")
    sub.add_argument("--seed", type=int, default=None, help="seed for random starts / generation (default 0)")
    sub.add_argument("--no-center", action="store_true", help="skip centering (data already centered)")


def _parse_u(text: str, order: int) -> tuple:
    vals = fileio.parse_int_list(text)
    if len(vals) == 1:
        vals = vals * order
    if len(vals) != order:
        raise UsageError(f"--u needs 1 or {order} entries, got {len(vals)}")
    return vals


def build_parser() -> _Parser:
    parser = _Parser(prog="tenvreg", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="run a scenario file and write accuracy tables")
    sim.add_argument("scenario", help="scenario file (key = value)")
    sim.add_argument("outdir")
    sim.add_argument("--reps", type=int, default=None, help="override replication count")
    sim.add_argument("--threads", type=int, default=_default_threads())
    sim.add_argument("--estimator", action="append", default=None, help="estimator to run (repeatable)")
    _add_fit_flags(sim)

    fit = subs.add_parser("fit", help="fit a dataset described by a manifest")
    fit.add_argument("manifest")
    fit.add_argument("outdir")
    fit.add_argument("--u", required=True, help="envelope dimensions, comma list (single value broadcasts)")
    fit.add_argument("--estimator", default="env-onestep", choices=sorted(ESTIMATORS))
    _add_fit_flags(fit)

    pv = subs.add_parser("pvalue", help="p-value maps from a fit directory")
    pv.add_argument("fitdir")
    pv.add_argument("manifest")
    pv.add_argument("--alpha", type=float, default=0.05)
    pv.add_argument("--fdr", type=float, default=None, help="BH false discovery rate level")
    pv.add_argument("--out", default=None, help="output directory (default: fit directory)")

    ren = subs.add_parser("render", help="render an order-2 slice of a tensor file to PGM")
    ren.add_argument("tensor")
    ren.add_argument("output")
    ren.add_argument("--slice", dest="slice_spec", default=None,
                     help="comma list, one entry per mode, ':' for the two free modes (default all-free for order 2)")

    sweep = subs.add_parser("dimsweep", help="fit a ladder of envelope dimensions")
    sweep.add_argument("manifest")
    sweep.add_argument("output", help="output CSV path")
    sweep.add_argument("--u-list", required=True,
                       help="comma list of dimensions; an item is broadcast, or a per-mode ':' tuple")
    sweep.add_argument("--estimator", default="env-onestep", choices=sorted(ESTIMATORS))
    _add_fit_flags(sweep)

    rank = subs.add_parser("rank", help="numerical rank of a mask (PGM or tensor file)")
    rank.add_argument("mask")
    rank.add_argument("--tol-ratio", type=float, default=1e-8)

    return parser


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    config, file_opts, names = fileio.read_scenario(args.scenario)
    overrides = {}
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = dataclasses.replace(config, **overrides)
    opts = _fit_options(args, base=file_opts)
    if args.estimator:
        names = args.estimator

    os.makedirs(args.outdir, exist_ok=True)
    data, truth = generate_scenario(config, 0)
    fileio.write_tensor(os.path.join(args.outdir, "y.tnv"), data.y)
    fileio.write_x_csv(os.path.join(args.outdir, "x.csv"), data.x)
    fileio.write_manifest(
        os.path.join(args.outdir, "manifest.txt"),
        fileio.Manifest(
            x_csv="x.csv", y_tensor="y.tnv", n=config.n, p=config.p, dims=config.dims,
            base_dir=args.outdir,
        ),
    )
    fileio.write_tensor(os.path.join(args.outdir, "b_true.tnv"), truth.b)
    for k, f in enumerate(truth.cov.factors):
        fileio.write_tensor(os.path.join(args.outdir, f"true_factor_{k}.tnv"), f)

    summaries = run_replications(config, names, fit_options=opts, threads=args.threads)
    with open(os.path.join(args.outdir, "replications.csv"), "w", encoding="utf-8") as fh:
        fh.write("rep,estimator,error,seconds\n")
        for name in names:
            s = summaries[name]
            for rep, err, secs in zip(s.reps, s.errors, s.seconds):
                fh.write(f"{rep},{name},{fileio.format_float(err)},{fileio.format_float(secs)}\n")
    with open(os.path.join(args.outdir, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("estimator,reps,failures,mean_error,stderr\n")
        for name in names:
            s = summaries[name]
            se = "NA" if s.stderr is None else fileio.format_float(s.stderr)
            fh.write(f"{name},{len(s.errors)},{s.failures},{fileio.format_float(s.mean_error)},{se}\n")
    for name in names:
        s = summaries[name]
        print(f"{name}: mean error {s.mean_error:.6g} over {len(s.errors)} reps ({s.failures} failures)")
    return 0


def _load_manifest_dataset(path: str) -> tuple:
    manifest = fileio.read_manifest(path)
    x, y = fileio.load_dataset(manifest)
    return manifest, Dataset(x=x, y=y)


def _run_estimator(name: str, data: Dataset, u: tuple, opts: FitOptions) -> FitResult:
    return ESTIMATORS[name](data, u, opts)


def _write_fit(outdir: str, result: FitResult, u: tuple, name: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    fileio.write_tensor(os.path.join(outdir, "b_hat.tnv"), result.b)
    for k, f in enumerate(result.cov.factors):
        fileio.write_tensor(os.path.join(outdir, f"factor_{k}.tnv"), f)
    dims = result.b.shape[:-1]
    p = result.b.shape[-1]
    full, env, saved = parameter_count(dims, u, p)
    lines = [
        f"estimator = {name}",
        f"tau = {fileio.format_float(result.cov.tau)}",
        "factors = " + " ".join(f"factor_{k}.tnv" for k in range(len(result.cov.factors))),
        f"n_factors = {len(result.cov.factors)}",
        f"u = {' '.join(str(v) for v in u)}",
        f"iterations = {result.iterations}",
        f"converged = {int(result.converged)}",
        f"seconds = {fileio.format_float(result.seconds)}",
        f"params_full = {full}",
        f"params_envelope = {env}",
        f"params_saved = {saved}",
        "objective_trace = " + " ".join(fileio.format_float(v) for v in result.objective_trace),
    ]
    with open(os.path.join(outdir, "diagnostics.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_fit(args) -> int:
    manifest, data = _load_manifest_dataset(args.manifest)
    u = _parse_u(args.u, len(manifest.dims))
    result = _run_estimator(args.estimator, data, u, _fit_options(args))
    _write_fit(args.outdir, result, u, args.estimator)
    print(f"fit written to {args.outdir} ({args.estimator}, {result.iterations} iterations)")
    return 0


def _read_fit_cov(fitdir: str) -> tuple:
    diag_path = os.path.join(fitdir, "diagnostics.txt")
    with open(diag_path, "r", encoding="utf-8") as fh:
        entries = {k: v for _, k, v in fileio.parse_keyvalues(fh.read())}
    tau = float(entries["tau"])
    names = entries["factors"].split()
    factors = [fileio.read_tensor(os.path.join(fitdir, nm)) for nm in names]
    b_hat = fileio.read_tensor(os.path.join(fitdir, "b_hat.tnv"))
    return b_hat, SeparableCovariance(factors=tuple(factors), tau=tau)


def cmd_pvalue(args) -> int:
    b_hat, cov = _read_fit_cov(args.fitdir)
    manifest, data = _load_manifest_dataset(args.manifest)
    outdir = args.out or args.fitdir
    os.makedirs(outdir, exist_ok=True)

    coef_cov = u_ols(sample_sigma_x(data.x), cov)
    pmap = pvalue_map(b_hat, coef_cov, manifest.n)
    fileio.write_tensor(os.path.join(outdir, "pvalues.tnv"), pmap.pvalues)
    fileio.write_tensor(os.path.join(outdir, "zscores.tnv"), pmap.zscores)
    raw_mask = threshold_map(pmap, args.alpha)
    fileio.write_tensor(os.path.join(outdir, "mask_alpha.tnv"), raw_mask.astype(np.float64))
    masks = {"mask_alpha": raw_mask}
    if args.fdr is not None:
        bh_mask = bh_fdr(pmap, args.fdr)
        fileio.write_tensor(os.path.join(outdir, "mask_bh.tnv"), bh_mask.astype(np.float64))
        masks["mask_bh"] = bh_mask

    if b_hat.ndim == 3:  # order-2 response: render per predictor slice
        for l in range(b_hat.shape[-1]):
            fileio.write_pgm(
                os.path.join(outdir, f"pvalues_p{l}.pgm"),
                fileio.render_to_bytes(pmap.pvalues[..., l]),
            )
            for label, mask in masks.items():
                fileio.write_pgm(
                    os.path.join(outdir, f"{label}_p{l}.pgm"),
                    np.where(mask[..., l], 0, 255).astype(np.uint8),
                )
    print(f"p-value maps written to {outdir}")
    return 0


def _parse_slice(spec: str, shape: tuple) -> tuple:
    parts = [s.strip() for s in spec.split(",")]
    if len(parts) != len(shape):
        raise UsageError(f"slice spec has {len(parts)} entries for an order-{len(shape)} tensor")
    free, idx = [], []
    for k, part in enumerate(parts):
        if part == ":":
            free.append(k)
            idx.append(slice(None))
        else:
            try:
                idx.append(int(part))
            except ValueError:
                raise UsageError(f"bad slice entry {part!r}") from None
    if len(free) != 2:
        raise UsageError("slice spec must leave exactly two modes free")
    return tuple(idx)


def cmd_render(args) -> int:
    t = fileio.read_tensor(args.tensor)
    if args.slice_spec is None:
        if t.ndim != 2:
            raise UsageError("--slice is required for tensors of order != 2")
        slab = t
    else:
        slab = t[_parse_slice(args.slice_spec, t.shape)]
    fileio.write_pgm(args.output, fileio.render_to_bytes(slab))
    print(f"rendered {args.tensor} -> {args.output}")
    return 0


def _parse_u_list(text: str, order: int) -> list:
    items = []
    for item in text.split(","):
        item = item.strip()
        if ":" in item:
            vals = tuple(int(v) for v in item.split(":"))
            if len(vals) != order:
                raise UsageError(f"per-mode item {item!r} needs {order} entries")
        else:
            vals = (int(item),) * order
        items.append(vals)
    return items


def cmd_dimsweep(args) -> int:
    manifest, data = _load_manifest_dataset(args.manifest)
    u_list = _parse_u_list(args.u_list, len(manifest.dims))
    opts = _fit_options(args)
    reference = ESTIMATORS["ols"](data, manifest.dims, opts)

    rows = []
    for u in u_list:
        full, env, saved = parameter_count(manifest.dims, u, manifest.p)
        try:
            result = _run_estimator(args.estimator, data, u, opts)
            rows.append((u, "ok", result.objective_trace[-1], error_metric(result.b, reference.b), env, saved))
        except (EstimationError, CovarianceError, np.linalg.LinAlgError) as exc:
            rows.append((u, f"failed: {exc}", None, None, env, saved))
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("u,status,objective,error_vs_ols,params_envelope,params_saved\n")
        for u, status, obj, err, env, saved in rows:
            ustr = ":".join(str(v) for v in u)
            obj_s = "" if obj is None else fileio.format_float(obj)
            err_s = "" if err is None else fileio.format_float(err)
            fh.write(f"{ustr},{status},{obj_s},{err_s},{env},{saved}\n")
    print(f"dimension sweep written to {args.output}")
    return 0


def cmd_rank(args) -> int:
    try:
        mask = fileio.read_tensor(args.mask)
    except fileio.FormatError:
        mask = fileio.read_pgm(args.mask)
    if mask.ndim != 2:
        raise UsageError("rank needs an order-2 mask")
    print(numerical_rank(mask, args.tol_ratio))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "pvalue": cmd_pvalue,
    "render": cmd_render,
    "dimsweep": cmd_dimsweep,
    "rank": cmd_rank,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (fileio.FormatError, fileio.ConfigError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, CovarianceError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
