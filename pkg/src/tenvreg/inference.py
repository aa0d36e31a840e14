"""Asymptotic inference for coefficient maps: factored coefficient
covariances, voxelwise z-tests, and multiplicity control.

The coefficient covariance is kept as scale * Sx^{-1} (x) F_m (x) ... (x) F_1
and only its diagonal is ever extracted at production sizes.  P-values use
the standard normal reference (the theory is asymptotic), two-sided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .covariance import SeparableCovariance, spd_inverse
from .estimators import EnvelopeBasis


@dataclass(frozen=True)
class CoefficientCovariance:
    """scale * Sx^{-1} (x) F_m (x) ... (x) F_1 for vec of the coefficient."""

    sigma_x_inv: np.ndarray
    factors: tuple
    scale: float
    kind: str

    @property
    def dims(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    def diagonal_tensor(self) -> np.ndarray:
        """Per-entry variances as an array of shape (r_1, ..., r_m, p)."""
        diags = [np.diag(f).copy() for f in self.factors]
        out = self.scale * np.diag(self.sigma_x_inv).copy()
        for d in reversed(diags):
            out = np.multiply.outer(d, out)
        return out


@dataclass(frozen=True)
class PValueMap:
    pvalues: np.ndarray
    zscores: np.ndarray
    n: int


def sample_sigma_x(x: np.ndarray) -> np.ndarray:
    """Predictor covariance with the 1/n divisor on centered columns."""
    xc = x - x.mean(axis=1, keepdims=True)
    return xc @ xc.T / x.shape[1]


def u_ols(sigma_x: np.ndarray, cov: SeparableCovariance) -> CoefficientCovariance:
    """Asymptotic covariance of the entrywise estimator: Sx^{-1} (x) Sigma."""
    sigma_x = np.atleast_2d(np.asarray(sigma_x, dtype=np.float64))
    sx_inv = spd_inverse(sigma_x, "predictor covariance")
    return CoefficientCovariance(
        sigma_x_inv=sx_inv,
        factors=tuple(f.copy() for f in cov.factors),
        scale=cov.tau,
        kind="u_ols",
    )


def u_gamma(sigma_x: np.ndarray, basis: EnvelopeBasis, omegas) -> CoefficientCovariance:
    """Known-basis coefficient covariance: material blocks only,
    Sx^{-1} (x) Gamma_m Omega_m Gamma_m' (x) ... (x) Gamma_1 Omega_1 Gamma_1'."""
    sigma_x = np.atleast_2d(np.asarray(sigma_x, dtype=np.float64))
    sx_inv = spd_inverse(sigma_x, "predictor covariance")
    factors = []
    for g, om in zip(basis.gammas, omegas):
        if g.shape[1] != om.shape[0]:
            raise ValueError(f"basis width {g.shape[1]} does not match block size {om.shape[0]}")
        f = g @ om @ g.T
        factors.append(0.5 * (f + f.T))
    return CoefficientCovariance(sigma_x_inv=sx_inv, factors=tuple(factors), scale=1.0, kind="u_gamma")


def pvalue_map(b_hat: np.ndarray, cov: CoefficientCovariance, n: int) -> PValueMap:
    """Two-sided normal p-values for every coefficient entry.

    z = sqrt(n) * b / sqrt(var) with var the matching diagonal entry of the
    factored covariance; zero-variance entries get z = 0 and p = 1.
    """
    b_hat = np.asarray(b_hat, dtype=np.float64)
    if n < 2:
        raise ValueError("need n >= 2")
    var = cov.diagonal_tensor()
    if var.shape != b_hat.shape:
        raise ValueError(f"coefficient shape {b_hat.shape} does not match covariance dims {var.shape}")
    if np.min(var) < -1e-12 * max(1.0, float(np.max(np.abs(var)))):
        raise ValueError("negative variance entry; covariance is corrupted")
    var = np.maximum(var, 0.0)
    z = np.zeros_like(b_hat)
    ok = var > 0
    z[ok] = np.sqrt(n) * b_hat[ok] / np.sqrt(var[ok])
    p = np.ones_like(b_hat)
    p[ok] = 2.0 * norm.sf(np.abs(z[ok]))
    return PValueMap(pvalues=p, zscores=z, n=int(n))


def threshold_map(pmap: PValueMap, alpha: float) -> np.ndarray:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return pmap.pvalues < alpha


def bh_fdr(pmap: PValueMap, q: float) -> np.ndarray:
    """Benjamini-Hochberg step-up over all entries, flattened.

    Finds the largest i with p_(i) <= i*q/N and rejects everything at or
    below that p-value.
    """
    if not 0 < q < 1:
        raise ValueError(f"q must be in (0, 1), got {q}")
    flat = pmap.pvalues.reshape(-1)
    n = flat.size
    order = np.sort(flat)
    thresholds = q * np.arange(1, n + 1) / n
    passing = np.nonzero(order <= thresholds)[0]
    if passing.size == 0:
        return np.zeros_like(pmap.pvalues, dtype=bool)
    cutoff = order[passing[-1]]
    return pmap.pvalues <= cutoff
