"""End-to-end command behavior: every subcommand, determinism of outputs,
and the documented exit codes (1 usage, 2 data/format, 3 numerical)."""

import os

import numpy as np

from tenvreg.cli import main
from tenvreg.estimators import Dataset, fitted_stack
from tenvreg.fileio import (
    Manifest,
    read_pgm,
    read_tensor,
    write_manifest,
    write_tensor,
    write_x_csv,
)


def write_dataset(tmp_path, dims=(6, 6), p=1, n=16, seed=3):
    rng = np.random.default_rng(seed)
    if p == 1:
        x = np.zeros((1, n))
        x[0, : n // 2] = 1.0
    else:
        x = rng.standard_normal((p, n))
    b = np.zeros(dims + (p,))
    b[1:4, 1:4, :] = 1.0
    y = fitted_stack(b, x) + 0.5 * rng.standard_normal(dims + (n,))
    write_x_csv(str(tmp_path / "x.csv"), x)
    write_tensor(str(tmp_path / "y.tnv"), y)
    man = Manifest(x_csv="x.csv", y_tensor="y.tnv", n=n, p=p, dims=dims, base_dir=str(tmp_path))
    write_manifest(str(tmp_path / "manifest.txt"), man)
    return str(tmp_path / "manifest.txt"), Dataset(x=x, y=y), b


SCENARIO = """
dims = 8 8
p = 1
n = 14
snr = 0.5
sigma0_sq = 1
u = 1 1
reps = 2
seed = 11
shape = square
size = 8
estimators = ols env-onestep
"""


class TestSimulate:
    def test_writes_outputs_and_is_byte_identical(self, tmp_path):
        scen = tmp_path / "scen.txt"
        scen.write_text(SCENARIO)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["simulate", str(scen), str(out1)]) == 0
        assert main(["simulate", str(scen), str(out2)]) == 0
        for name in ("summary.csv", "y.tnv", "b_true.tnv", "x.csv", "manifest.txt"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
        # per-replication rows are byte-stable except the wall-time column
        def strip_seconds(path):
            return ["," .join(line.split(",")[:3]) for line in path.read_text().splitlines()]

        assert strip_seconds(out1 / "replications.csv") == strip_seconds(out2 / "replications.csv")
        lines = (out1 / "replications.csv").read_text().strip().splitlines()
        assert lines[0] == "rep,estimator,error,seconds"
        assert len(lines) == 1 + 2 * 2  # two estimators, two reps

    def test_single_rep_stderr_na(self, tmp_path):
        scen = tmp_path / "scen.txt"
        scen.write_text(SCENARIO.replace("reps = 2", "reps = 1"))
        out = tmp_path / "o"
        assert main(["simulate", str(scen), str(out)]) == 0
        summary = (out / "summary.csv").read_text()
        assert ",NA" in summary

    def test_bad_scenario_exit_code(self, tmp_path):
        scen = tmp_path / "scen.txt"
        scen.write_text("dims = 8 8\nu = 1 1\nmystery = 3\n")
        assert main(["simulate", str(scen), str(tmp_path / "o")]) == 2

    def test_seed_flag_overrides_scenario(self, tmp_path):
        scen = tmp_path / "scen.txt"
        scen.write_text(SCENARIO.replace("reps = 2", "reps = 1"))
        a, b, c = (tmp_path / d for d in "abc")
        assert main(["simulate", str(scen), str(a)]) == 0
        assert main(["simulate", str(scen), str(b), "--seed", "99"]) == 0
        assert main(["simulate", str(scen), str(c), "--seed", "11"]) == 0
        assert (a / "y.tnv").read_bytes() != (b / "y.tnv").read_bytes()
        assert (a / "y.tnv").read_bytes() == (c / "y.tnv").read_bytes()  # file seed is 11


class TestFit:
    def test_ols_and_envelope_outputs(self, tmp_path):
        manifest, data, b = write_dataset(tmp_path)
        fit_dir = tmp_path / "fit"
        assert main(["fit", manifest, str(fit_dir), "--u", "2", "--estimator", "env-iterative"]) == 0
        b_hat = read_tensor(str(fit_dir / "b_hat.tnv"))
        assert b_hat.shape == (6, 6, 1)
        diag = (fit_dir / "diagnostics.txt").read_text()
        assert "params_saved = 32" in diag  # 1 * (36 - 4)
        assert os.path.exists(fit_dir / "factor_0.tnv")

    def test_u_equals_r_matches_ols(self, tmp_path):
        manifest, _, _ = write_dataset(tmp_path)
        d_ols, d_env = tmp_path / "ols", tmp_path / "env"
        assert main(["fit", manifest, str(d_ols), "--u", "6", "--estimator", "ols"]) == 0
        assert main(["fit", manifest, str(d_env), "--u", "6", "--estimator", "env-onestep"]) == 0
        b1 = read_tensor(str(d_ols / "b_hat.tnv"))
        b2 = read_tensor(str(d_env / "b_hat.tnv"))
        assert np.max(np.abs(b1 - b2)) <= 1e-10 * max(1.0, np.max(np.abs(b1)))

    def test_corrupt_tensor_magic_no_partial_outputs(self, tmp_path):
        manifest, _, _ = write_dataset(tmp_path)
        y_path = tmp_path / "y.tnv"
        blob = y_path.read_bytes()
        y_path.write_bytes(b"XXXXX" + blob[5:])
        out = tmp_path / "fit"
        assert main(["fit", manifest, str(out), "--u", "2"]) == 2
        assert not out.exists()

    def test_bad_u_usage_error(self, tmp_path):
        manifest, _, _ = write_dataset(tmp_path)
        assert main(["fit", manifest, str(tmp_path / "f"), "--u", "1,2,3"]) == 1

    def test_numerical_failure_exit_code(self, tmp_path):
        # duplicated predictor rows: singular design
        rng = np.random.default_rng(0)
        x = np.vstack([np.ones(10), np.ones(10)])
        y = rng.standard_normal((4, 4, 10))
        write_x_csv(str(tmp_path / "x.csv"), x)
        write_tensor(str(tmp_path / "y.tnv"), y)
        man = Manifest(x_csv="x.csv", y_tensor="y.tnv", n=10, p=2, dims=(4, 4), base_dir=str(tmp_path))
        write_manifest(str(tmp_path / "m.txt"), man)
        assert main(["fit", str(tmp_path / "m.txt"), str(tmp_path / "f"), "--u", "2", "--no-center"]) == 3


class TestPvalueRender:
    def test_pvalue_pipeline(self, tmp_path):
        manifest, _, _ = write_dataset(tmp_path, n=24)
        fit_dir = tmp_path / "fit"
        assert main(["fit", manifest, str(fit_dir), "--u", "6", "--estimator", "ols"]) == 0
        assert main(["pvalue", str(fit_dir), manifest, "--alpha", "0.05", "--fdr", "0.1"]) == 0
        p = read_tensor(str(fit_dir / "pvalues.tnv"))
        assert p.shape == (6, 6, 1)
        assert np.all(p >= 0) and np.all(p <= 1)
        raw = read_tensor(str(fit_dir / "mask_alpha.tnv")).astype(bool)
        bh = read_tensor(str(fit_dir / "mask_bh.tnv")).astype(bool)
        assert np.all(raw | ~bh)  # BH inside raw at the same q
        assert (fit_dir / "pvalues_p0.pgm").exists()
        assert (fit_dir / "mask_alpha_p0.pgm").exists()

    def test_render_slice_and_determinism(self, tmp_path):
        t = np.random.default_rng(5).standard_normal((4, 5, 3))
        src = str(tmp_path / "t.tnv")
        write_tensor(src, t)
        out1, out2 = str(tmp_path / "a.pgm"), str(tmp_path / "b.pgm")
        assert main(["render", src, out1, "--slice", ":,:,1"]) == 0
        assert main(["render", src, out2, "--slice", ":,:,1"]) == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()
        img = read_pgm(out1)
        assert img.shape == (4, 5)
        assert img.min() == 0 and img.max() == 255

    def test_render_constant_slice_black(self, tmp_path):
        src = str(tmp_path / "c.tnv")
        write_tensor(src, np.full((3, 3), 2.0))
        out = str(tmp_path / "c.pgm")
        assert main(["render", src, out]) == 0
        assert not read_pgm(out).any()

    def test_render_bad_slice(self, tmp_path):
        src = str(tmp_path / "t.tnv")
        write_tensor(src, np.zeros((2, 2, 2)))
        assert main(["render", src, str(tmp_path / "o.pgm"), "--slice", ":,:"]) == 1


class TestDimsweepRank:
    def test_dimsweep_csv(self, tmp_path):
        manifest, _, _ = write_dataset(tmp_path, n=20)
        out = str(tmp_path / "sweep.csv")
        assert main([
            "dimsweep", manifest, out, "--u-list", "1,3,6", "--estimator", "env-onestep",
        ]) == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0].startswith("u,status,objective,error_vs_ols")
        assert len(lines) == 4
        # u = r row: error vs OLS ~ 0, parameter counts monotone in u
        last = lines[3].split(",")
        assert float(last[3]) <= 1e-16
        saved = [int(line.split(",")[-1]) for line in lines[1:]]
        assert saved[0] > saved[1] > saved[2] == 0

    def test_rank_on_pgm_and_tensor(self, tmp_path, capsys):
        from tenvreg.fileio import write_pgm

        mask = np.zeros((8, 8))
        mask[2:6, 2:6] = 1.0
        write_pgm(str(tmp_path / "m.pgm"), (mask * 255).astype(np.uint8))
        assert main(["rank", str(tmp_path / "m.pgm")]) == 0
        assert capsys.readouterr().out.strip() == "1"
        write_tensor(str(tmp_path / "m.tnv"), np.eye(5))
        assert main(["rank", str(tmp_path / "m.tnv")]) == 0
        assert capsys.readouterr().out.strip() == "5"

    def test_missing_file_data_error(self, tmp_path):
        assert main(["rank", str(tmp_path / "nope.pgm")]) == 2


def test_eeg_scale_end_to_end(tmp_path):
    # channel-by-time sized synthetic study: binary group plus two covariates
    import time

    rng = np.random.default_rng(7)
    n, dims = 121, (64, 64)
    group = np.zeros(n)
    group[:61] = 1.0
    x = np.vstack([group, rng.standard_normal(n), rng.standard_normal(n)])
    b = np.zeros(dims + (3,))
    b[10:30, 10:30, 0] = 1.0
    y = fitted_stack(b, x) + rng.standard_normal(dims + (n,))
    write_x_csv(str(tmp_path / "x.csv"), x)
    write_tensor(str(tmp_path / "y.tnv"), y)
    write_manifest(
        str(tmp_path / "m.txt"),
        Manifest(x_csv="x.csv", y_tensor="y.tnv", n=n, p=3, dims=dims, base_dir=str(tmp_path)),
    )
    fit_dir = tmp_path / "fit"
    t0 = time.perf_counter()
    assert main(["fit", str(tmp_path / "m.txt"), str(fit_dir), "--u", "8", "--estimator", "env-onestep"]) == 0
    assert main(["pvalue", str(fit_dir), str(tmp_path / "m.txt"), "--alpha", "0.05", "--fdr", "0.05"]) == 0
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    assert read_tensor(str(fit_dir / "b_hat.tnv")).shape == (64, 64, 3)
    assert (fit_dir / "pvalues_p2.pgm").exists()
