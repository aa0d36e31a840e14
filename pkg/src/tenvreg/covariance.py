"""Separable (Kronecker) covariance: representation, flip-flop MLE from
residual stacks, whitening, log-determinants, and matrix-normal sampling.

A covariance over vec(T) for tensors T of shape (r_1, ..., r_m) is kept in
factored form ``tau * S_m (x) ... (x) S_1`` where each per-mode factor S_k is
symmetric positive definite with unit Frobenius norm (the identifiability
convention) and tau > 0 carries the overall scale.  The Kronecker factor
order is descending mode index, matching the column-major vec layout; the
dense product is only ever formed through :func:`dense` for small oracles.

Residual collections are passed as "stacked" arrays of shape
(r_1, ..., r_m, n) with the observation index last; a list of n tensors is
accepted anywhere a stack is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .tensor_ops import _unfold, kron, mode_product


class CovarianceError(ValueError):
    """Raised for non-PD factors and singular per-mode updates."""


@dataclass(frozen=True)
class SeparableCovariance:
    """tau * S_m (x) ... (x) S_1 with unit-Frobenius SPD factors S_k."""

    factors: tuple
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(np.asarray(f, dtype=np.float64) for f in self.factors))
        if self.tau <= 0:
            raise CovarianceError(f"tau must be positive, got {self.tau}")
        for k, f in enumerate(self.factors):
            if f.ndim != 2 or f.shape[0] != f.shape[1]:
                raise CovarianceError(f"factor {k} is not square: shape {f.shape}")
            if np.max(np.abs(f - f.T)) > 1e-12 * max(1.0, np.max(np.abs(f))):
                raise CovarianceError(f"factor {k} is not symmetric")

    @property
    def dims(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)


@dataclass(frozen=True)
class CholeskyFactors:
    """Per-mode lower-triangular L_k with S_k = L_k L_k^T, plus sqrt(tau)."""

    lowers: tuple
    sqrt_tau: float


def as_stacked(residuals) -> np.ndarray:
    """Coerce a list of same-shaped tensors (or an already stacked array)
    into a stacked array with the observation index last."""
    if isinstance(residuals, np.ndarray):
        return np.asarray(residuals, dtype=np.float64)
    return np.stack([np.asarray(r, dtype=np.float64) for r in residuals], axis=-1)


def spd_cholesky(mat: np.ndarray, label: str = "factor") -> np.ndarray:
    """Lower Cholesky factor with a single minimal-jitter retry.

    On failure adds jitter lam*I with lam = 1e-10 * trace/r once; a second
    failure raises.  Large silent jitter would corrupt likelihood values.
    """
    mat = np.asarray(mat, dtype=np.float64)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        lam = 1e-10 * np.trace(mat) / mat.shape[0]
        try:
            return np.linalg.cholesky(mat + lam * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError:
            raise CovarianceError(f"{label} is not positive definite") from None


def spd_inverse(mat: np.ndarray, label: str = "factor") -> np.ndarray:
    low = spd_cholesky(mat, label)
    inv = scipy.linalg.cho_solve((low, True), np.eye(mat.shape[0]))
    return 0.5 * (inv + inv.T)


def _whiten_stack(stack: np.ndarray, inverses: Sequence[Optional[np.ndarray]]) -> np.ndarray:
    """Apply per-mode inverse factors to every observation in a stack;
    entries of ``inverses`` that are None are skipped."""
    out = stack
    for j, inv in enumerate(inverses):
        if inv is not None:
            out = mode_product(out, inv, j)
    return out


def matricize_second_moment(stack: np.ndarray, inverses: Sequence[Optional[np.ndarray]], k: int) -> np.ndarray:
    """sum_i E_{i(k)} {kron of the given inverses} E_{i(k)}^T, symmetrized.

    ``inverses[k]`` must be None; the observation axis is folded into the
    unfolding columns so the sum over i comes for free.
    """
    wht = _whiten_stack(stack, inverses)
    out = _unfold(stack, k) @ _unfold(wht, k).T
    return 0.5 * (out + out.T)


def flip_flop_sweeps(
    stack: np.ndarray,
    factors: list,
    max_sweeps: int = 100,
    tol: float = 1e-8,
) -> list:
    """Cycle the per-mode updates

        S_k <- (n prod_{j!=k} r_j)^{-1} sum_i E_{i(k)} {kron_{j!=k} S_j^{-1}} E_{i(k)}^T

    until the maximum relative Frobenius change of the factors drops below
    ``tol`` or ``max_sweeps`` is reached.  Factors are updated in place and
    unnormalized; the per-mode scale split is anchored by the input factors.
    """
    m = stack.ndim - 1
    dims = stack.shape[:m]
    n = stack.shape[-1]
    for _ in range(max_sweeps):
        max_change = 0.0
        for k in range(m):
            invs: list = [None] * m
            for j in range(m):
                if j != k:
                    invs[j] = spd_inverse(factors[j], f"mode-{j} factor")
            denom = n * int(np.prod(dims)) // dims[k]
            upd = matricize_second_moment(stack, invs, k) / denom
            if np.linalg.norm(upd) == 0.0:
                raise CovarianceError(f"singular update at mode {k}: zero residual second moment")
            change = np.linalg.norm(upd - factors[k]) / np.linalg.norm(upd)
            max_change = max(max_change, change)
            factors[k] = upd
        if max_change < tol:
            break
    return factors


def flip_flop_mle(
    residuals,
    init: Optional[SeparableCovariance] = None,
    max_sweeps: int = 100,
    tol: float = 1e-8,
) -> SeparableCovariance:
    """Maximum likelihood separable covariance from centered residuals.

    Runs :func:`flip_flop_sweeps` from identity factors (or ``init``), then
    normalizes the factors and recomputes the scale tau.  The overall scale
    cancels inside the sweeps, so tau is attached only at the end.
    """
    stack = as_stacked(residuals)
    m = stack.ndim - 1
    dims = stack.shape[:m]
    n = stack.shape[-1]
    if n < 1:
        raise CovarianceError("need at least one residual")
    for k in range(m):
        if n * int(np.prod(dims)) // dims[k] < dims[k]:
            raise CovarianceError(
                f"mode {k}: n * prod(other dims) = {n * int(np.prod(dims)) // dims[k]}"
                f" < r_k = {dims[k]}; per-mode update would be singular"
            )

    if init is not None:
        factors = [f.copy() for f in init.factors]
    else:
        factors = [np.eye(r) for r in dims]
    factors = flip_flop_sweeps(stack, factors, max_sweeps=max_sweeps, tol=tol)
    return normalize_and_tau(factors, stack)


def normalize_and_tau(factors: Sequence[np.ndarray], residuals) -> SeparableCovariance:
    """Divide each factor by its Frobenius norm and compute the scale

        tau = (n prod_j r_j)^{-1} sum_i vec(e_i)^T {kron_k S_k^{-1}} vec(e_i)

    via mode products, never materializing the Kronecker inverse."""
    stack = as_stacked(residuals)
    n = stack.shape[-1]
    normed = []
    for k, f in enumerate(factors):
        f = np.asarray(f, dtype=np.float64)
        nrm = np.linalg.norm(f)
        if nrm == 0.0:
            raise CovarianceError(f"mode-{k} factor is zero")
        normed.append(f / nrm)
    invs = [spd_inverse(f, f"mode-{k} factor") for k, f in enumerate(normed)]
    wht = _whiten_stack(stack, invs)
    tau = float(np.sum(stack * wht)) / (n * int(np.prod(stack.shape[:-1])))
    if tau <= 0.0:
        raise CovarianceError("nonpositive scale tau; residuals degenerate")
    return SeparableCovariance(factors=tuple(normed), tau=tau)


def whiten_apply(t: np.ndarray, cov: SeparableCovariance, exclude_mode: Optional[int] = None) -> np.ndarray:
    """Apply per-mode inverse factors along every mode except ``exclude_mode``.

    With no excluded mode the result satisfies
    vec(out) = (tau * S_m (x) ... (x) S_1)^{-1} vec(t), i.e. tau divides the
    output.  With a mode excluded only the normalized factor inverses of the
    remaining modes are applied (the convention of the per-mode second-moment
    compressions), and tau is left out.
    """
    t = np.asarray(t, dtype=np.float64)
    m = cov.order
    invs: list = [None] * m
    for j in range(m):
        if j != exclude_mode:
            invs[j] = spd_inverse(cov.factors[j], f"mode-{j} factor")
    out = _whiten_stack(t, invs)
    if exclude_mode is None:
        out = out / cov.tau
    return out


def log_det(cov: SeparableCovariance) -> float:
    """log |tau * S_m (x) ... (x) S_1| computed from the factors."""
    dims = cov.dims
    total = int(np.prod(dims))
    out = total * np.log(cov.tau)
    for k, f in enumerate(cov.factors):
        low = spd_cholesky(f, f"mode-{k} factor")
        out += (total // dims[k]) * 2.0 * float(np.sum(np.log(np.diag(low))))
    return float(out)


def cholesky_factors(cov: SeparableCovariance) -> CholeskyFactors:
    lowers = tuple(spd_cholesky(f, f"mode-{k} factor") for k, f in enumerate(cov.factors))
    return CholeskyFactors(lowers=lowers, sqrt_tau=float(np.sqrt(cov.tau)))


def sample_matrix_normal(
    dims: Sequence[int],
    cov: SeparableCovariance,
    rng: np.random.Generator,
    n: Optional[int] = None,
) -> np.ndarray:
    """Draw tensors whose vec has covariance tau * S_m (x) ... (x) S_1.

    Draws i.i.d. standard normal cores and applies the per-mode Cholesky
    factors scaled by sqrt(tau).  With ``n`` given, returns a stacked array
    with the observation index last; otherwise a single tensor.
    """
    dims = tuple(int(d) for d in dims)
    if dims != cov.dims:
        raise CovarianceError(f"dims {dims} do not match covariance dims {cov.dims}")
    chol = cholesky_factors(cov)
    shape = dims if n is None else dims + (n,)
    z = rng.standard_normal(shape)
    out = z
    for k, low in enumerate(chol.lowers):
        out = mode_product(out, low, k)
    return chol.sqrt_tau * out


def kron_order(factors: Sequence[np.ndarray]) -> list:
    """Kronecker factor order for the column-major vec layout: descending
    mode index.  The single place this convention is defined."""
    return list(factors)[::-1]


def dense(cov: SeparableCovariance) -> np.ndarray:
    """Materialize the full covariance matrix.  Small-instance oracles only."""
    return cov.tau * kron(kron_order(cov.factors))


def working_factors(cov: SeparableCovariance) -> list:
    """Factors in the canonical per-mode scale split: tau spread uniformly,
    so the plain Kronecker product of the returned matrices is the full
    covariance.  This is the scale convention for all per-mode whitened
    second-moment compressions."""
    scale = cov.tau ** (1.0 / cov.order)
    return [scale * f for f in cov.factors]


def matrix_normal_loglik(residuals, cov: SeparableCovariance) -> float:
    """Exact Gaussian log-likelihood of centered residuals under ``cov``."""
    stack = as_stacked(residuals)
    n = stack.shape[-1]
    total = int(np.prod(stack.shape[:-1]))
    quad = float(np.sum(stack * whiten_apply(stack, cov)))
    return -0.5 * (n * log_det(cov) + quad + n * total * np.log(2.0 * np.pi))
