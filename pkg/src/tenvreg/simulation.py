"""Synthetic-data generators for the simulation studies and the accuracy
harness: binary signal shapes, subspace-structured separable covariances,
two-group and multi-predictor designs, and seeded replication runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .covariance import SeparableCovariance, sample_matrix_normal, spd_cholesky
from .estimators import (
    Dataset,
    EnvelopeBasis,
    FitOptions,
    fit_iterative,
    fit_onestep,
    fitted_stack,
    make_basis,
    ols_fit,
)
from .optim import orthonormalize
from .tensor_ops import matricize, tucker


@dataclass(frozen=True)
class ShapeSpec:
    """Binary signal geometry.

    kinds: 'square' (centered block, rank 1), 'cross' (centered bars,
    rank 2), 'disk' (radius defaults to the largest value whose mask has
    numerical rank 8), 'mask-file' (PGM file, nonzero pixels are ones).
    """

    kind: str
    size: int = 64
    block_side: Optional[int] = None
    bar_width: Optional[int] = None
    radius: Optional[float] = None
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("square", "cross", "disk", "mask-file"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind != "mask-file" and self.size < 8:
            raise ValueError("size must be at least 8")


@dataclass(frozen=True)
class ScenarioConfig:
    dims: tuple
    p: int = 1
    n: int = 20
    snr: float = 0.1
    sigma0_sq: float = 1.0
    u: tuple = ()
    reps: int = 1
    seed: int = 0
    shape: Optional[ShapeSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "u", tuple(int(v) for v in self.u))
        if len(self.u) != len(self.dims):
            raise ValueError("u must have one entry per response mode")
        if any(uk > rk or uk < 0 for uk, rk in zip(self.u, self.dims)):
            raise ValueError("u must satisfy 0 <= u_k <= r_k")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if self.sigma0_sq < 0:
            raise ValueError("sigma0_sq must be nonnegative")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")


@dataclass(frozen=True)
class GroundTruth:
    b: np.ndarray
    cov: SeparableCovariance
    basis: EnvelopeBasis
    sigma: float = 1.0


def numerical_rank(b: np.ndarray, tol_ratio: float = 1e-8) -> int:
    """Count of singular values above tol_ratio times the largest."""
    s = np.linalg.svd(np.asarray(b, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol_ratio * s[0]))


def calibrate_disk_radius(size: int, target_rank: int = 8) -> float:
    """Largest radius below 0.45*size whose disk mask has the target rank."""
    best = None
    for rho in np.arange(2.0, 0.45 * size, 0.1):
        if numerical_rank(_disk(size, rho)) == target_rank:
            best = float(rho)
    if best is None:
        raise ValueError(f"no radius gives rank {target_rank} at size {size}")
    return best


def _disk(size: int, rho: float) -> np.ndarray:
    c = (size - 1) / 2.0
    i, j = np.ogrid[:size, :size]
    return (((i - c) ** 2 + (j - c) ** 2) <= rho**2).astype(np.float64)


def make_shape(spec: ShapeSpec) -> np.ndarray:
    """Binary {0,1} signal matrix for the given spec."""
    size = spec.size
    if spec.kind == "square":
        side = spec.block_side if spec.block_side is not None else size // 2
        lo = (size - side) // 2
        out = np.zeros((size, size))
        out[lo : lo + side, lo : lo + side] = 1.0
        return out
    if spec.kind == "cross":
        width = spec.bar_width if spec.bar_width is not None else size // 8
        lo = (size - width) // 2
        out = np.zeros((size, size))
        out[lo : lo + width, :] = 1.0
        out[:, lo : lo + width] = 1.0
        return out
    if spec.kind == "disk":
        rho = spec.radius if spec.radius is not None else calibrate_disk_radius(size)
        return _disk(size, rho)
    from .fileio import read_pgm

    if spec.path is None:
        raise ValueError("mask-file shape needs a path")
    img = read_pgm(spec.path)
    return (img > 0).astype(np.float64)


def _ensure_pd(mat: np.ndarray) -> np.ndarray:
    """Add the minimal documented jitter if a Cholesky factorization fails."""
    try:
        np.linalg.cholesky(mat)
        return mat
    except np.linalg.LinAlgError:
        lam = 1e-10 * np.trace(mat) / mat.shape[0]
        jittered = mat + lam * np.eye(mat.shape[0])
        spd_cholesky(jittered, "generated factor")
        return jittered


def covariance_from_basis(
    basis: EnvelopeBasis, sigma0_sq: float, rng: np.random.Generator
) -> SeparableCovariance:
    """Per-mode factors Gamma A A' Gamma' + sigma0^2 Gamma0 A0 A0' Gamma0'
    with standard-uniform A blocks, each factor normalized to unit
    Frobenius norm (scale 1)."""
    factors = []
    for g, g0 in zip(basis.gammas, basis.gamma0s):
        u, r0 = g.shape[1], g0.shape[1]
        a = rng.uniform(size=(u, u))
        f = g @ (a @ a.T) @ g.T
        if r0 > 0:
            a0 = rng.uniform(size=(r0, r0))
            f = f + sigma0_sq * (g0 @ (a0 @ a0.T) @ g0.T)
        f = _ensure_pd(0.5 * (f + f.T))
        factors.append(f / np.linalg.norm(f))
    return SeparableCovariance(factors=tuple(factors), tau=1.0)


def gen_envelope_covariance(
    b: np.ndarray, u: Sequence[int], sigma0_sq: float, rng: np.random.Generator
) -> tuple:
    """Separable covariance whose per-mode material subspaces contain the
    corresponding spans of the coefficient.

    Each basis is the top-u_k left singular vectors of the mode-k unfolding
    of ``b`` rotated by a random orthogonal matrix, so span containment
    holds by construction.
    """
    b = np.asarray(b, dtype=np.float64)
    u = tuple(int(v) for v in u)
    m = len(u)
    gammas = []
    for k in range(m):
        unf = matricize(b, k)
        rank_k = numerical_rank(unf) if np.any(unf) else 0
        if u[k] < rank_k:
            raise ValueError(f"u[{k}] = {u[k]} below the mode-{k} rank {rank_k} of the signal")
        left, _, _ = np.linalg.svd(unf, full_matrices=True)
        g = left[:, : u[k]]
        o = orthonormalize(rng.uniform(size=(u[k], u[k])))
        gammas.append(g @ o)
    basis = make_basis(gammas)
    cov = covariance_from_basis(basis, sigma0_sq, rng)
    return cov, basis


def _noise_sigma(b: np.ndarray, cov: SeparableCovariance, snr: float) -> float:
    """Scale solving ||B||_F / (sigma * sqrt(tau * prod_k tr(S_k))) = snr."""
    if np.isinf(snr):
        return 0.0
    total = cov.tau * float(np.prod([np.trace(f) for f in cov.factors]))
    return float(np.linalg.norm(b)) / (snr * np.sqrt(total))


def _two_group_x(n: int) -> np.ndarray:
    """Balanced deterministic two-group design: ceil(n/2) ones, rest zeros."""
    x = np.zeros((1, n))
    x[0, : (n + 1) // 2] = 1.0
    return x


def gen_dataset(config: ScenarioConfig, shape_or_b: np.ndarray, rng: np.random.Generator) -> tuple:
    """Data from the linear model Y_i = B xbar X_i + sigma * eps_i with a
    subspace-structured separable error covariance.

    ``shape_or_b`` is either an order-m signal (treated as the p=1
    coefficient) or a full coefficient with a trailing predictor mode.
    """
    m = len(config.dims)
    arr = np.asarray(shape_or_b, dtype=np.float64)
    if arr.ndim == m:
        if config.p != 1:
            raise ValueError("an order-m signal implies p = 1")
        b = arr[..., None]
    elif arr.ndim == m + 1 and arr.shape[-1] == config.p:
        b = arr
    else:
        raise ValueError(f"signal shape {arr.shape} does not match dims {config.dims} and p {config.p}")
    if b.shape[:-1] != config.dims:
        raise ValueError(f"signal dims {b.shape[:-1]} do not match configured dims {config.dims}")

    cov, basis = gen_envelope_covariance(b, config.u, config.sigma0_sq, rng)
    sigma = _noise_sigma(b, cov, config.snr)
    if config.p == 1:
        x = _two_group_x(config.n)
    else:
        x = rng.standard_normal((config.p, config.n))
    y = fitted_stack(b, x)
    if sigma > 0:
        y = y + sigma * sample_matrix_normal(config.dims, cov, rng, n=config.n)
    return Dataset(x=x, y=y), GroundTruth(b=b, cov=cov, basis=basis, sigma=sigma)


def gen_dataset_3way(config: ScenarioConfig, rng: np.random.Generator) -> tuple:
    """Order-3 design: random semi-orthogonal bases, standard normal core,
    coefficient assembled from them, covariance from the same bases."""
    if len(config.dims) != 3:
        raise ValueError("gen_dataset_3way needs an order-3 response")
    return gen_core_dataset(config, rng)


def gen_core_dataset(config: ScenarioConfig, rng: np.random.Generator) -> tuple:
    """Tucker-core design of any order: B = [[Theta; Gamma_1..Gamma_m, I_p]]."""
    gammas = [orthonormalize(rng.uniform(size=(r, uk))) for r, uk in zip(config.dims, config.u)]
    basis = make_basis(gammas)
    theta = rng.standard_normal(config.u + (config.p,))
    b = tucker(theta, gammas + [np.eye(config.p)])
    cov = covariance_from_basis(basis, config.sigma0_sq, rng)
    sigma = _noise_sigma(b, cov, config.snr)
    if config.p == 1:
        x = _two_group_x(config.n)
    else:
        x = rng.standard_normal((config.p, config.n))
    y = fitted_stack(b, x)
    if sigma > 0:
        y = y + sigma * sample_matrix_normal(config.dims, cov, rng, n=config.n)
    return Dataset(x=x, y=y), GroundTruth(b=b, cov=cov, basis=basis, sigma=sigma)


def gen_cp_dataset(shape: np.ndarray, n: int, rng: np.random.Generator) -> tuple:
    """Scalar-on-tensor data for external comparisons: standard normal
    tensor predictors and unit noise, responses by tensor inner product."""
    b = np.asarray(shape, dtype=np.float64)
    x = rng.standard_normal(b.shape + (n,))
    eps = rng.standard_normal(n)
    y = np.tensordot(x, b, axes=(tuple(range(b.ndim)), tuple(range(b.ndim)))) + eps
    return y, x, b


def error_metric(b_hat: np.ndarray, b_true: np.ndarray) -> float:
    """Squared Frobenius norm of the difference."""
    b_hat = np.asarray(b_hat, dtype=np.float64)
    b_true = np.asarray(b_true, dtype=np.float64)
    if b_hat.shape != b_true.shape:
        raise ValueError(f"shape mismatch: {b_hat.shape} vs {b_true.shape}")
    return float(np.sum((b_hat - b_true) ** 2))


# ---------------------------------------------------------------------------
# replication harness

ESTIMATORS: dict = {
    "ols": lambda data, u, opts: ols_fit(data, do_center=opts.center),
    "env-iterative": fit_iterative,
    "env-onestep": fit_onestep,
}


@dataclass
class ReplicationSummary:
    estimator: str
    errors: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    reps: list = field(default_factory=list)
    failures: int = 0

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.errors)) if self.errors else float("nan")

    @property
    def stderr(self) -> Optional[float]:
        if len(self.errors) < 2:
            return None
        return float(np.std(self.errors, ddof=1) / np.sqrt(len(self.errors)))


def replication_rng(master_seed: int, rep: int, stream: int = 0) -> np.random.Generator:
    """Independent generator per (seed, replication, stream) via the
    SeedSequence avalanche mix; deterministic across runs and platforms."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(master_seed), int(rep), int(stream))))


def generate_scenario(config: ScenarioConfig, rep: int) -> tuple:
    rng = replication_rng(config.seed, rep)
    if config.shape is not None:
        return gen_dataset(config, make_shape(config.shape), rng)
    return gen_core_dataset(config, rng)


def run_replications(
    config: ScenarioConfig,
    estimators: Sequence[str] = ("ols", "env-iterative"),
    reps: Optional[int] = None,
    fit_options: Optional[FitOptions] = None,
    threads: int = 1,
    progress: Optional[Callable[[int], None]] = None,
) -> dict:
    """Run seeded replications of a scenario for each named estimator.

    Per-replication failures are recorded and excluded from the summaries.
    Aggregation order is fixed by replication index, so summaries are
    bitwise identical for any thread count.
    """
    reps = config.reps if reps is None else reps
    opts = fit_options or FitOptions()
    summaries = {name: ReplicationSummary(estimator=name) for name in estimators}

    def one_rep(rep: int) -> dict:
        data, truth = generate_scenario(config, rep)
        out = {}
        for name in estimators:
            fitter = ESTIMATORS[name]
            t0 = time.perf_counter()
            try:
                result = fitter(data, config.u, opts)
                out[name] = (error_metric(result.b, truth.b), time.perf_counter() - t0, None)
            except Exception as exc:  # noqa: BLE001 - failures are data
                out[name] = (None, time.perf_counter() - t0, exc)
        return out

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_rep, range(reps)))
    else:
        results = []
        for rep in range(reps):
            results.append(one_rep(rep))
            if progress is not None:
                progress(rep)

    for rep, out in enumerate(results):
        for name, (err, secs, exc) in out.items():
            s = summaries[name]
            if exc is not None:
                s.failures += 1
                continue
            s.errors.append(err)
            s.seconds.append(secs)
            s.reps.append(rep)
    return summaries
