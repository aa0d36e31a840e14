"""Dense tensor operations on numpy arrays with column-major (first index
fastest) layout conventions.

A tensor of order m is a plain ``numpy.ndarray`` with shape (r_1, ..., r_m).
All flattening and unfolding here follows the colexicographic convention:
``vec`` stacks entries with the first index varying fastest, and the mode-k
unfolding orders its columns colexicographically over the remaining modes in
increasing mode order.  Modes are 0-based.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np


def vec(t: np.ndarray) -> np.ndarray:
    """Stack the entries of a tensor into a vector, first index fastest."""
    return np.asarray(t, dtype=np.float64).reshape(-1, order="F")


def unvec(v: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`vec` for the given dimension vector."""
    v = np.asarray(v, dtype=np.float64)
    n = int(np.prod(dims)) if len(dims) else 1
    if v.size != n:
        raise ValueError(f"cannot fold vector of length {v.size} into dims {tuple(dims)}")
    return v.reshape(tuple(dims), order="F")


def _unfold(t: np.ndarray, k: int) -> np.ndarray:
    """Mode-k unfolding that may alias its input; internal hot path."""
    if not 0 <= k < t.ndim:
        raise ValueError(f"mode {k} out of range for order-{t.ndim} tensor")
    return np.moveaxis(t, k, 0).reshape(t.shape[k], -1, order="F")


def matricize(t: np.ndarray, k: int) -> np.ndarray:
    """Mode-k unfolding: rows indexed by mode k, columns colexicographic
    over the remaining modes.  Returns a fresh 2-D array.
    """
    out = _unfold(np.asarray(t, dtype=np.float64), k)
    return out if out.base is None else out.copy()


def fold(mat: np.ndarray, k: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`matricize`: rebuild the tensor of shape ``dims``
    from its mode-k unfolding.
    """
    mat = np.asarray(mat, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    if not 0 <= k < len(dims):
        raise ValueError(f"mode {k} out of range for dims {dims}")
    rest = tuple(d for j, d in enumerate(dims) if j != k)
    expected = (dims[k], int(np.prod(rest)) if rest else 1)
    if mat.shape != expected:
        raise ValueError(f"matrix shape {mat.shape} does not fold into dims {dims} at mode {k}")
    return np.moveaxis(mat.reshape((dims[k],) + rest, order="F"), 0, k)


def mode_product(t: np.ndarray, c: np.ndarray, k: int) -> np.ndarray:
    """k-mode product: multiply every mode-k fiber of ``t`` by the matrix
    ``c`` (shape s x r_k), replacing dimension r_k with s.
    """
    t = np.asarray(t, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != t.shape[k]:
        raise ValueError(f"matrix shape {c.shape} does not match mode-{k} dimension {t.shape[k]}")
    dims = list(t.shape)
    dims[k] = c.shape[0]
    return fold(c @ _unfold(t, k), k, dims)


def mode_vec_product(t: np.ndarray, v: np.ndarray, k: int) -> np.ndarray:
    """k-mode vector product: inner product of every mode-k fiber with ``v``,
    dropping mode k.  An order-1 input yields a 0-d array (scalar tensor).
    """
    t = np.asarray(t, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != t.shape[k]:
        raise ValueError(f"vector length {v.size} does not match mode-{k} dimension {t.shape[k]}")
    return np.tensordot(t, v, axes=([k], [0]))


def tucker(core: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Tucker product: apply ``factors[k]`` along mode k of ``core``.

    ``factors[k]`` must have as many columns as the k-th core dimension;
    the list length must equal the core order.
    """
    core = np.asarray(core, dtype=np.float64)
    if len(factors) != core.ndim:
        raise ValueError(f"need {core.ndim} factors, got {len(factors)}")
    out = core
    for k, g in enumerate(factors):
        out = mode_product(out, g, k)
    return out


def kron(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of the matrices in the given order.

    Intended for densifying small separable operators in oracles and tests;
    everything production-sized stays in factored form.
    """
    if len(mats) == 0:
        raise ValueError("kron of an empty list")
    return reduce(np.kron, (np.asarray(m, dtype=np.float64) for m in mats))


def frobenius(t: np.ndarray) -> float:
    """Frobenius norm; equals the Euclidean norm of vec(t)."""
    return float(np.linalg.norm(np.asarray(t, dtype=np.float64)))
