"""Tensor-response regression estimators.

Three fitters share one model: a tensor response regressed on a vector
predictor with Kronecker-separable error covariance.

* :func:`ols_fit` regresses every response entry on X independently.
* :func:`fit_iterative` alternates between per-mode basis estimation (a
  Grassmann minimization of a two-log-determinant objective), core
  regression, and covariance block updates, tracking the negative
  log-likelihood objective, which is non-increasing across iterations.
* :func:`fit_onestep` replaces the basis step with a separable objective
  solved one direction at a time per mode and runs the remaining steps
  exactly once.

The envelope structure splits each response mode into a material subspace
(span of Gamma_k, dimension u_k) that carries the regression signal and an
immaterial complement that only adds noise; the fitted coefficient is the
OLS coefficient projected onto the material subspaces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import optim
from .covariance import (
    SeparableCovariance,
    flip_flop_mle,
    flip_flop_sweeps,
    log_det,
    matricize_second_moment,
    normalize_and_tau,
    spd_inverse,
    whiten_apply,
    working_factors,
)
from .tensor_ops import mode_product


class EstimationError(ValueError):
    """Raised for singular designs and propagated numerical failures."""


# ---------------------------------------------------------------------------
# data container


@dataclass(frozen=True)
class Dataset:
    """Paired observations: X is p x n, Y is stacked with shape dims + (n,)."""

    x: np.ndarray
    y: np.ndarray
    x_mean: np.ndarray = None
    y_mean: np.ndarray = None
    centered: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("x must be a p x n matrix")
        if x.shape[1] != y.shape[-1]:
            raise ValueError(f"sample counts disagree: x has {x.shape[1]}, y has {y.shape[-1]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.x_mean is None:
            object.__setattr__(self, "x_mean", np.zeros(x.shape[0]))
        if self.y_mean is None:
            object.__setattr__(self, "y_mean", np.zeros(y.shape[:-1]))

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.x.shape[0]

    @property
    def dims(self) -> tuple:
        return self.y.shape[:-1]


def center(dataset: Dataset) -> Dataset:
    """Remove sample means from X columns and Y entries, keeping the means."""
    if dataset.n < 2:
        raise EstimationError("centering needs at least two observations")
    if dataset.centered:
        return dataset
    x_mean = dataset.x.mean(axis=1)
    y_mean = dataset.y.mean(axis=-1)
    return Dataset(
        x=dataset.x - x_mean[:, None],
        y=dataset.y - y_mean[..., None],
        x_mean=x_mean,
        y_mean=y_mean,
        centered=True,
    )


def uncenter(dataset: Dataset) -> Dataset:
    """Add stored means back; inverse of :func:`center`."""
    if not dataset.centered:
        return dataset
    return Dataset(
        x=dataset.x + dataset.x_mean[:, None],
        y=dataset.y + dataset.y_mean[..., None],
        centered=False,
    )


# ---------------------------------------------------------------------------
# envelope parameterization


@dataclass(frozen=True)
class EnvelopeBasis:
    """Per-mode semi-orthogonal bases Gamma_k and their completions."""

    gammas: tuple
    gamma0s: tuple

    @property
    def u(self) -> tuple:
        return tuple(g.shape[1] for g in self.gammas)

    @property
    def dims(self) -> tuple:
        return tuple(g.shape[0] for g in self.gammas)

    def projector(self, k: int) -> np.ndarray:
        g = self.gammas[k]
        return g @ g.T

    def projectors(self) -> list:
        return [self.projector(k) for k in range(len(self.gammas))]

    def complement_projector(self, k: int) -> np.ndarray:
        g0 = self.gamma0s[k]
        return g0 @ g0.T


def orthogonal_complement(g: np.ndarray, r: int) -> np.ndarray:
    if g.shape[1] == 0:
        return np.eye(r)
    comp = scipy.linalg.null_space(g.T)
    if comp.shape != (r, r - g.shape[1]):
        raise EstimationError("basis is rank deficient; cannot complete")
    return comp


def make_basis(gammas: Sequence[np.ndarray]) -> EnvelopeBasis:
    gammas = tuple(np.asarray(g, dtype=np.float64) for g in gammas)
    gamma0s = tuple(orthogonal_complement(g, g.shape[0]) for g in gammas)
    return EnvelopeBasis(gammas=gammas, gamma0s=gamma0s)


@dataclass(frozen=True)
class EnvelopeModel:
    """Core coefficient, basis, and material/immaterial covariance blocks."""

    theta: np.ndarray
    basis: EnvelopeBasis
    omegas: tuple
    omega0s: tuple


@dataclass(frozen=True)
class FitResult:
    b: np.ndarray
    cov: SeparableCovariance
    model: Optional[EnvelopeModel]
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    seconds: float = 0.0
    x_mean: np.ndarray = None
    y_mean: np.ndarray = None


@dataclass
class FitOptions:
    tol: float = 1e-6
    max_iter: int = 50
    random_starts: int = 3
    seed: int = 0
    center: bool = True
    grassmann_max_iter: int = 500
    grassmann_tol: float = 1e-8
    cov_sweeps: int = 100
    cov_tol: float = 1e-8


# ---------------------------------------------------------------------------
# building blocks


def _design_projector(x: np.ndarray) -> np.ndarray:
    """(XX^T)^{-1} X, guarded against ill-conditioned designs."""
    xtx = x @ x.T
    if np.linalg.cond(xtx) > 1e12:
        raise EstimationError("predictor Gram matrix XX^T is singular or ill-conditioned")
    return np.linalg.solve(xtx, x)


def fitted_stack(b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Stack of per-observation predictions B xbar X_i, observation last."""
    return mode_product(b, x.T, b.ndim - 1)


def ols_fit(dataset: Dataset, do_center: bool = True, cov_sweeps: int = 100, cov_tol: float = 1e-8) -> FitResult:
    """Entrywise least squares plus separable residual covariance."""
    t0 = time.perf_counter()
    data = center(dataset) if do_center else dataset
    proj = _design_projector(data.x)
    b = mode_product(data.y, proj, data.y.ndim - 1)
    resid = data.y - fitted_stack(b, data.x)
    cov = flip_flop_mle(resid, max_sweeps=cov_sweeps, tol=cov_tol)
    obj = objective_l(b, cov, data)
    return FitResult(
        b=b,
        cov=cov,
        model=None,
        objective_trace=[obj],
        iterations=0,
        converged=True,
        seconds=time.perf_counter() - t0,
        x_mean=data.x_mean,
        y_mean=data.y_mean,
    )


def compute_mn(
    k: int,
    dataset: Dataset,
    cov: SeparableCovariance,
    projectors: Sequence[np.ndarray],
    b_ols: np.ndarray,
) -> tuple:
    """Whitened mode-k second moments of the partial-projection residuals
    (M_k) and of the raw responses (N_k).

    The residual for mode k projects the OLS coefficient through
    ``projectors[j]`` on every mode j != k before predicting; on the first
    pass all projectors are identities, so the residual is the plain OLS
    residual and M_k coincides with the initial covariance factor.
    """
    m = len(dataset.dims)
    facs = working_factors(cov)
    invs = [spd_inverse(facs[j], f"mode-{j} factor") if j != k else None for j in range(m)]

    proj_b = b_ols
    for j in range(m):
        if j != k:
            proj_b = mode_product(proj_b, projectors[j], j)
    delta = dataset.y - fitted_stack(proj_b, dataset.x)

    denom = dataset.n * int(np.prod(dataset.dims)) // dataset.dims[k]
    m_k = matricize_second_moment(delta, invs, k) / denom
    n_k = matricize_second_moment(dataset.y, invs, k) / denom
    return m_k, n_k


def envelope_objective_fk(g: np.ndarray, m_k: np.ndarray, n_k: np.ndarray) -> float:
    """log|G' M_k G| + log|G' N_k^{-1} G| for semi-orthogonal G."""
    n_inv = spd_inverse(n_k, "N_k")
    val = _two_logdet(g, m_k, n_inv)
    if not np.isfinite(val):
        raise EstimationError("objective undefined: non-PD compression")
    return val


def _two_logdet(g: np.ndarray, a: np.ndarray, c: np.ndarray) -> float:
    stacked = np.stack([g.T @ a @ g, g.T @ c @ g])
    signs, logs = np.linalg.slogdet(stacked)
    if signs[0] <= 0 or signs[1] <= 0:
        return np.inf
    return float(logs[0] + logs[1])


def _two_logdet_grad(g: np.ndarray, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    ag = a @ g
    cg = c @ g
    return 2.0 * (ag @ np.linalg.inv(g.T @ ag) + cg @ np.linalg.inv(g.T @ cg))


def onestep_basis(sigma_k: np.ndarray, n_k: np.ndarray, u_k: int, sphere_iters: int = 100) -> np.ndarray:
    """Sequential basis construction: one unit direction at a time.

    At step s the candidate direction lives in the orthogonal complement of
    the directions found so far and minimizes
    log{w'(G0' Sigma G0)w} + log{w'(G0' N G0)^{-1}w} over the unit sphere.
    """
    sigma_k = np.asarray(sigma_k, dtype=np.float64)
    n_k = np.asarray(n_k, dtype=np.float64)
    r = sigma_k.shape[0]
    if not 0 <= u_k <= r:
        raise EstimationError(f"need 0 <= u_k <= r_k, got {u_k} > {r}")
    cols = np.zeros((r, 0))
    for _ in range(u_k):
        comp = orthogonal_complement(cols, r)
        a = comp.T @ sigma_k @ comp
        b = comp.T @ n_k @ comp
        w = optim.sphere_minimize(0.5 * (a + a.T), 0.5 * (b + b.T), max_iter=sphere_iters)
        direction = comp @ w
        direction = direction / np.linalg.norm(direction)
        cols = np.column_stack([cols, direction])
    return optim.orthonormalize(cols) if u_k > 0 else cols


def update_theta(dataset: Dataset, basis: EnvelopeBasis) -> np.ndarray:
    """Regress the core tensor (responses compressed by Gamma_k') on X."""
    z = tucker_responses(dataset.y, basis)
    proj = _design_projector(dataset.x)
    return mode_product(z, proj, z.ndim - 1)


def tucker_responses(y: np.ndarray, basis: EnvelopeBasis) -> np.ndarray:
    out = y
    for j, g in enumerate(basis.gammas):
        out = mode_product(out, g.T, j)
    return out


def update_omegas(
    dataset: Dataset,
    basis: EnvelopeBasis,
    theta: np.ndarray,
    cov_prev: SeparableCovariance,
    omegas_prev: Optional[Sequence[np.ndarray]] = None,
    cov_sweeps: int = 100,
    cov_tol: float = 1e-8,
) -> tuple:
    """Material covariance blocks by flip-flop on the core residuals, and
    immaterial blocks by the closed-form compression of the whitened
    response second moments (previous-iteration factors in the weights).

    The flip-flop warm-starts at the previous material blocks, or at the
    compression of the previous covariance factors on the first pass, which
    anchors the per-mode scales consistently with the immaterial blocks.
    """
    m = len(dataset.dims)
    u = basis.u
    facs = working_factors(cov_prev)

    z = tucker_responses(dataset.y, basis)
    s = z - fitted_stack(theta, dataset.x)

    if omegas_prev is None:
        omegas_prev = [basis.gammas[k].T @ facs[k] @ basis.gammas[k] for k in range(m)]

    if all(uk > 0 for uk in u):
        omegas = flip_flop_sweeps(s, [w.copy() for w in omegas_prev], max_sweeps=cov_sweeps, tol=cov_tol)
    else:
        # empty core: material blocks fall back to compressed response moments
        omegas = []
        for k in range(m):
            invs = [spd_inverse(facs[j], f"mode-{j} factor") if j != k else None for j in range(m)]
            denom = dataset.n * int(np.prod(dataset.dims)) // dataset.dims[k]
            n_k = matricize_second_moment(dataset.y, invs, k) / denom
            omegas.append(basis.gammas[k].T @ n_k @ basis.gammas[k])

    omega0s = []
    for k in range(m):
        g0 = basis.gamma0s[k]
        if g0.shape[1] == 0:
            omega0s.append(np.zeros((0, 0)))
            continue
        invs = [spd_inverse(facs[j], f"mode-{j} factor") if j != k else None for j in range(m)]
        denom = dataset.n * int(np.prod(dataset.dims)) // dataset.dims[k]
        n_k = matricize_second_moment(dataset.y, invs, k) / denom
        omega0s.append(g0.T @ n_k @ g0)
    return tuple(omegas), tuple(omega0s)


def _refine_blocks(
    dataset: Dataset,
    basis: EnvelopeBasis,
    b: np.ndarray,
    omegas: Sequence[np.ndarray],
    omega0s: Sequence[np.ndarray],
    max_sweeps: int = 25,
    tol: float = 1e-7,
) -> tuple:
    """Exact per-mode likelihood updates of the covariance blocks given the
    coefficient: both blocks of mode k are compressions of the residual
    second moment whitened by the other modes' full factors.  Each update
    maximizes the likelihood over that mode's blocks with the rest held
    fixed, so cycling never increases the objective; stopping at any sweep
    is therefore safe.
    """
    m = len(basis.gammas)
    omegas = [np.asarray(w, dtype=np.float64).copy() for w in omegas]
    omega0s = [np.asarray(w, dtype=np.float64).copy() for w in omega0s]
    resid = dataset.y - fitted_stack(b, dataset.x)
    dims = dataset.dims
    denoms = [dataset.n * int(np.prod(dims)) // dims[k] for k in range(m)]

    def factor(j):
        g, g0 = basis.gammas[j], basis.gamma0s[j]
        f = g @ omegas[j] @ g.T
        if g0.shape[1] > 0:
            f = f + g0 @ omega0s[j] @ g0.T
        return 0.5 * (f + f.T)

    for _ in range(max_sweeps):
        max_change = 0.0
        for k in range(m):
            invs = [spd_inverse(factor(j), f"mode-{j} factor") if j != k else None for j in range(m)]
            t_k = matricize_second_moment(resid, invs, k) / denoms[k]
            new_w = basis.gammas[k].T @ t_k @ basis.gammas[k]
            new_w0 = basis.gamma0s[k].T @ t_k @ basis.gamma0s[k]
            for new, old in ((new_w, omegas), (new_w0, omega0s)):
                if new.size:
                    nrm = np.linalg.norm(new)
                    if nrm > 0:
                        max_change = max(max_change, np.linalg.norm(new - old[k]) / nrm)
            omegas[k], omega0s[k] = new_w, new_w0
        if max_change < tol:
            break
    return tuple(omegas), tuple(omega0s)


def reconstruct(
    basis: EnvelopeBasis,
    b_ols: np.ndarray,
    omegas: Sequence[np.ndarray],
    omega0s: Sequence[np.ndarray],
    dataset: Dataset,
) -> tuple:
    """Assemble the coefficient and covariance from the envelope blocks.

    B projects the OLS coefficient onto the material subspaces; each
    covariance factor is rebuilt from its blocks and the set is normalized
    with the scale recomputed from the residuals of the new coefficient.
    """
    m = len(basis.gammas)
    b = b_ols
    for k in range(m):
        b = mode_product(b, basis.projector(k), k)
    raw = []
    for k in range(m):
        g, g0 = basis.gammas[k], basis.gamma0s[k]
        f = g @ omegas[k] @ g.T
        if g0.shape[1] > 0:
            f = f + g0 @ omega0s[k] @ g0.T
        raw.append(0.5 * (f + f.T))
    resid = dataset.y - fitted_stack(b, dataset.x)
    cov = normalize_and_tau(raw, resid)
    return b, cov


def objective_l(b: np.ndarray, cov: SeparableCovariance, dataset: Dataset) -> float:
    """log|Sigma| + mean residual quadratic form, in factored form."""
    resid = dataset.y - fitted_stack(b, dataset.x)
    quad = float(np.sum(resid * whiten_apply(resid, cov)))
    return log_det(cov) + quad / dataset.n


# ---------------------------------------------------------------------------
# fitters


def _basis_starts(
    u_k: int,
    sigma_k: np.ndarray,
    n_k: np.ndarray,
    rng: np.random.Generator,
    n_random: int,
    warm: Optional[np.ndarray],
) -> list:
    """First pass: one-step basis, top eigenvectors of N_k, seeded random
    bases.  Later passes track the incumbent: warm start plus eigenvectors."""
    starts = []
    if warm is None:
        starts.append(onestep_basis(sigma_k, n_k, u_k, sphere_iters=25))
    _, vecs = np.linalg.eigh(n_k)
    starts.append(vecs[:, -u_k:])
    if warm is None:
        r = n_k.shape[0]
        for _ in range(n_random):
            starts.append(optim.orthonormalize(rng.standard_normal((r, u_k))))
    else:
        starts.append(warm)
    return starts


def _estimate_basis_mode(
    k: int,
    u_k: int,
    dataset: Dataset,
    cov: SeparableCovariance,
    projectors: Sequence[np.ndarray],
    b_ols: np.ndarray,
    opts: FitOptions,
    rng: np.random.Generator,
    warm: Optional[np.ndarray],
) -> np.ndarray:
    r = dataset.dims[k]
    if u_k == r:
        return np.eye(r)
    if u_k == 0:
        return np.zeros((r, 0))
    m_k, n_k = compute_mn(k, dataset, cov, projectors, b_ols)
    n_inv = spd_inverse(n_k, "N_k")
    sigma_k = working_factors(cov)[k]
    starts = _basis_starts(u_k, sigma_k, n_k, rng, opts.random_starts, warm)
    return optim.grassmann_minimize(
        lambda g: _two_logdet(g, m_k, n_inv),
        lambda g: _two_logdet_grad(g, m_k, n_inv),
        r,
        u_k,
        starts,
        max_iter=opts.grassmann_max_iter,
        tol=opts.grassmann_tol,
    )


def _check_u(u: Sequence[int], dims: tuple) -> tuple:
    u = tuple(int(v) for v in u)
    if len(u) != len(dims):
        raise EstimationError(f"u has {len(u)} entries for a response of order {len(dims)}")
    for uk, rk in zip(u, dims):
        if not 0 <= uk <= rk:
            raise EstimationError(f"envelope dimension {uk} outside [0, {rk}]")
    return u


def _degenerate_zero_fit(data: Dataset, u: tuple, t0: float) -> FitResult:
    """Any u_k = 0 empties the material core: B is identically zero and the
    covariance is the plain separable MLE of the responses."""
    basis = make_basis([np.eye(r)[:, :uk] for r, uk in zip(data.dims, u)])
    cov = flip_flop_mle(data.y)
    b = np.zeros(data.dims + (data.p,))
    theta = np.zeros(u + (data.p,))
    omegas, omega0s = update_omegas(data, basis, theta, cov)
    model = EnvelopeModel(theta=theta, basis=basis, omegas=omegas, omega0s=omega0s)
    return FitResult(
        b=b,
        cov=cov,
        model=model,
        objective_trace=[objective_l(b, cov, data)],
        iterations=1,
        converged=True,
        seconds=time.perf_counter() - t0,
        x_mean=data.x_mean,
        y_mean=data.y_mean,
    )


def fit_iterative(dataset: Dataset, u: Sequence[int], opts: Optional[FitOptions] = None) -> FitResult:
    """Alternating estimation of basis, core coefficient, and covariance
    blocks, stopping when the objective stabilizes.

    One pass over the modes per outer iteration; each mode's minimization
    starts from the one-step basis, the top eigenvectors of the whitened
    response moment, seeded random bases, and (after the first iteration)
    the current basis, so the per-mode objective never deteriorates.
    """
    opts = opts or FitOptions()
    if opts.max_iter < 1:
        raise EstimationError("max_iter must be at least 1")
    t0 = time.perf_counter()
    data = center(dataset) if opts.center else dataset
    u = _check_u(u, data.dims)
    m = len(data.dims)

    if any(uk == 0 for uk in u):
        return _degenerate_zero_fit(data, u, t0)

    ols = ols_fit(data, do_center=False, cov_sweeps=opts.cov_sweeps, cov_tol=opts.cov_tol)
    rng = np.random.default_rng(opts.seed)
    cov = ols.cov
    # projectors start at the identity, so the first pass sees plain OLS
    # residuals; afterwards they track the freshest per-mode bases
    projs = [np.eye(r) for r in data.dims]
    basis: Optional[EnvelopeBasis] = None
    state = None  # accepted (b, cov, theta, basis, omegas, omega0s)
    trace: list = []
    converged = False
    iterations = 0

    for it in range(opts.max_iter):
        gammas = [None] * m
        for k in range(m):
            warm = basis.gammas[k] if basis is not None else None
            gammas[k] = _estimate_basis_mode(k, u[k], data, cov, projs, ols.b, opts, rng, warm)
            projs[k] = gammas[k] @ gammas[k].T
        cand_basis = make_basis(gammas)

        theta = update_theta(data, cand_basis)
        omegas_prev = state[4] if state is not None else None
        omegas, omega0s = update_omegas(
            data, cand_basis, theta, cov, omegas_prev, cov_sweeps=opts.cov_sweeps, cov_tol=opts.cov_tol
        )
        b = ols.b
        for k in range(m):
            b = mode_product(b, cand_basis.projector(k), k)
        omegas, omega0s = _refine_blocks(data, cand_basis, b, omegas, omega0s)
        b, cand_cov = reconstruct(cand_basis, ols.b, omegas, omega0s, data)

        obj = objective_l(b, cand_cov, data)
        iterations = it + 1
        if trace and obj > trace[-1]:
            # the updates no longer lower the objective; keep the last
            # accepted iterate so the trace stays non-increasing
            converged = True
            break
        basis, cov = cand_basis, cand_cov
        state = (b, cov, theta, basis, omegas, omega0s)
        for k in range(m):
            projs[k] = basis.projector(k)
        trace.append(obj)
        if len(trace) >= 2 and abs(trace[-2] - obj) <= opts.tol * max(1.0, abs(trace[-2])):
            converged = True
            break

    b, cov, theta, basis, omegas, omega0s = state
    model = EnvelopeModel(theta=theta, basis=basis, omegas=omegas, omega0s=omega0s)
    return FitResult(
        b=b,
        cov=cov,
        model=model,
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        seconds=time.perf_counter() - t0,
        x_mean=data.x_mean,
        y_mean=data.y_mean,
    )


def fit_onestep(dataset: Dataset, u: Sequence[int], opts: Optional[FitOptions] = None) -> FitResult:
    """Non-iterative variant: per-mode bases from the separable objective
    (initial covariance in place of the projection residual moment), then a
    single pass of core regression, covariance blocks, and reconstruction.
    """
    opts = opts or FitOptions()
    t0 = time.perf_counter()
    data = center(dataset) if opts.center else dataset
    u = _check_u(u, data.dims)
    m = len(data.dims)

    if any(uk == 0 for uk in u):
        return _degenerate_zero_fit(data, u, t0)

    ols = ols_fit(data, do_center=False, cov_sweeps=opts.cov_sweeps, cov_tol=opts.cov_tol)
    cov0 = ols.cov
    facs = working_factors(cov0)
    identity_projs = [np.eye(r) for r in data.dims]
    gammas = []
    for k in range(m):
        r = data.dims[k]
        if u[k] == r:
            gammas.append(np.eye(r))
            continue
        _, n_k = compute_mn(k, data, cov0, identity_projs, ols.b)
        gammas.append(onestep_basis(facs[k], n_k, u[k], sphere_iters=40))
    basis = make_basis(gammas)

    theta = update_theta(data, basis)
    omegas, omega0s = update_omegas(data, basis, theta, cov0, cov_sweeps=opts.cov_sweeps, cov_tol=opts.cov_tol)
    b = ols.b
    for k in range(m):
        b = mode_product(b, basis.projector(k), k)
    omegas, omega0s = _refine_blocks(data, basis, b, omegas, omega0s)
    b, cov = reconstruct(basis, ols.b, omegas, omega0s, data)

    model = EnvelopeModel(theta=theta, basis=basis, omegas=omegas, omega0s=omega0s)
    trace = [objective_l(b, cov, data)]
    return FitResult(
        b=b,
        cov=cov,
        model=model,
        objective_trace=trace,
        iterations=1,
        converged=True,
        seconds=time.perf_counter() - t0,
        x_mean=data.x_mean,
        y_mean=data.y_mean,
    )


def parameter_count(r: Sequence[int], u: Sequence[int], p: int) -> tuple:
    """Free-parameter totals: (full model, structured model, savings).

    full      = p*prod(r_k) + sum r_k(r_k+1)/2
    structured = p*prod(u_k) + sum {u_k(r_k-u_k) + u_k(u_k+1)/2
                                    + (r_k-u_k)(r_k-u_k+1)/2}
    saved     = p*(prod(r_k) - prod(u_k))
    """
    r = tuple(int(v) for v in r)
    u = tuple(int(v) for v in u)
    if len(r) != len(u) or any(uk > rk or uk < 0 for uk, rk in zip(u, r)):
        raise ValueError("u must satisfy 0 <= u_k <= r_k modewise")
    full = p * int(np.prod(r)) + sum(rk * (rk + 1) // 2 for rk in r)
    env = p * int(np.prod(u)) + sum(
        uk * (rk - uk) + uk * (uk + 1) // 2 + (rk - uk) * (rk - uk + 1) // 2
        for rk, uk in zip(r, u)
    )
    saved = p * (int(np.prod(r)) - int(np.prod(u)))
    return full, env, saved
