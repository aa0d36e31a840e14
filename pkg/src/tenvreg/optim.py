"""Optimizers for the basis objectives: projected gradient descent over
semi-orthogonal matrices (Grassmann geometry, since the objectives are
right-rotation invariant) and a unit-sphere minimizer for the sequential
one-direction-at-a-time construction.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


def orthonormalize(mat: np.ndarray) -> np.ndarray:
    """Orthonormal basis with the span of ``mat`` (thin QR)."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[1] == 0:
        return mat.copy()
    q, _ = np.linalg.qr(mat)
    return q


def grassmann_minimize(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    r: int,
    u: int,
    starts: Sequence[np.ndarray],
    max_iter: int = 500,
    tol: float = 1e-8,
    armijo_slope: float = 1e-4,
    backtrack: float = 0.5,
) -> np.ndarray:
    """Minimize a rotation-invariant objective over r x u semi-orthogonal
    matrices by projected gradient descent with an orthonormalizing
    retraction and Armijo backtracking, run from every start.

    Returns the best local optimum found; its objective never exceeds the
    objective at any provided start.
    """
    if not 0 <= u <= r:
        raise ValueError(f"need 0 <= u <= r, got u={u}, r={r}")
    if len(starts) == 0:
        raise ValueError("at least one start is required")
    if u == 0:
        return np.zeros((r, 0))

    best_g: Optional[np.ndarray] = None
    best_f = np.inf
    for start in starts:
        g = orthonormalize(start)
        if g.shape != (r, u):
            raise ValueError(f"start has shape {start.shape}, expected ({r}, {u})")
        f = fun(g)
        if not np.isfinite(f):
            continue
        step = 1.0
        for _ in range(max_iter):
            egrad = grad(g)
            pgrad = egrad - g @ (g.T @ egrad)
            sq = float(np.sum(pgrad * pgrad))
            if sq <= 1e-30:
                break
            alpha = step
            f_new, g_new = np.inf, g
            accepted = False
            for _ in range(60):
                cand = orthonormalize(g - alpha * pgrad)
                f_cand = fun(cand)
                if np.isfinite(f_cand) and f_cand <= f - armijo_slope * alpha * sq:
                    f_new, g_new, accepted = f_cand, cand, True
                    break
                alpha *= backtrack
            if not accepted:
                break
            step = min(alpha / backtrack, 1e4)
            done = (f - f_new) <= tol * max(1.0, abs(f))
            g, f = g_new, f_new
            if done:
                break
        if f < best_f:
            best_f, best_g = f, g
    if best_g is None:
        raise ValueError("objective evaluation failed at every start")
    return best_g


def sphere_minimize(a: np.ndarray, b: np.ndarray, max_iter: int = 100) -> np.ndarray:
    """Approximately minimize log(w'Aw) + log(w'B^{-1}w) over unit vectors.

    Candidate starts are all eigenvectors of A, of B, and of A+B; each is
    refined by projected gradient with renormalization, and the best is
    returned.  Both inputs must be symmetric positive definite.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = a.shape[0]
    if a.shape != (d, d) or b.shape != (d, d):
        raise ValueError("matrices must be square and of equal size")
    binv = np.linalg.inv(b)
    binv = 0.5 * (binv + binv.T)

    def quads(w: np.ndarray) -> tuple:
        aw = a @ w
        bw = binv @ w
        return float(w @ aw), float(w @ bw), aw, bw

    def value(qa: float, qb: float) -> float:
        if qa <= 0 or qb <= 0:
            return np.inf
        return np.log(qa) + np.log(qb)

    candidates = []
    for mat in (a, b, a + b):
        _, vecs = np.linalg.eigh(mat)
        candidates.extend(vecs.T)

    best_w, best_f = None, np.inf
    for w0 in candidates:
        w = w0 / np.linalg.norm(w0)
        qa, qb, aw, bw = quads(w)
        val = value(qa, qb)
        step = 1.0
        for _ in range(max_iter):
            egrad = 2.0 * aw / qa + 2.0 * bw / qb
            pgrad = egrad - float(w @ egrad) * w
            sq = float(np.sum(pgrad * pgrad))
            if sq <= 1e-30:
                break
            alpha, accepted = step, False
            for _ in range(60):
                cand = w - alpha * pgrad
                cand = cand / np.linalg.norm(cand)
                ca, cb, caw, cbw = quads(cand)
                f_cand = value(ca, cb)
                if np.isfinite(f_cand) and f_cand <= val - 1e-4 * alpha * sq:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            step = min(alpha * 2.0, 1e4)
            done = (val - f_cand) <= 1e-9 * max(1.0, abs(val))
            w, val, qa, qb, aw, bw = cand, f_cand, ca, cb, caw, cbw
            if done:
                break
        if val < best_f:
            best_f, best_w = val, w
    return best_w
