"""Softmax, sparsemax and alpha-entmax over the last axis.

entmax solves for the threshold tau by bisection; the input gradient uses the
closed-form Jacobian, the gradient wrt the learnable alpha uses a central
finite difference on alpha.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from polar.core import Array, Module, Value, make_op, transpose
from polar.errors import DomainError

BISECT_ITERS = 50
ALPHA_FD_STEP = 1e-4
_ALPHA_FLOOR = 1.0 + 1e-6
_ALPHA_CEIL = 2.0


def _as_rows(z: Array, op: str) -> Array:
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0 or z.shape[-1] == 0:
        raise DomainError(f"{op}: empty input")
    if not np.all(np.isfinite(z)):
        raise DomainError(f"{op}: non-finite input")
    return z


def softmax(z: Array) -> Array:
    z = _as_rows(z, "softmax")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def sparsemax(z: Array) -> Array:
    """Euclidean projection onto the simplex (sort-based closed form)."""
    z = _as_rows(z, "sparsemax")
    zs = -np.sort(-z, axis=-1)
    n = z.shape[-1]
    ks = np.arange(1, n + 1, dtype=np.float64)
    csum = np.cumsum(zs, axis=-1)
    support = 1.0 + ks * zs > csum
    k = support.sum(axis=-1, keepdims=True)
    tau = (np.take_along_axis(csum, k.astype(np.int64) - 1, axis=-1) - 1.0) / k
    return np.maximum(z - tau, 0.0)


def entmax(z: Array, alpha: float, n_iter: int = BISECT_ITERS) -> Array:
    """alpha-entmax for alpha in (1, 2]; callers route alpha <= 1 to softmax."""
    z = _as_rows(z, "entmax")
    if alpha <= 1.0:
        raise DomainError(f"entmax: alpha={alpha} <= 1; use softmax explicitly")
    if alpha > 2.0:
        raise DomainError(f"entmax: alpha={alpha} > 2 is not supported")

    am1 = alpha - 1.0
    x = am1 * z
    hi = x.max(axis=-1, keepdims=True)
    lo = hi - 1.0
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        mass = (np.maximum(x - mid, 0.0) ** (1.0 / am1)).sum(axis=-1, keepdims=True)
        above = mass >= 1.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    p = np.maximum(x - lo, 0.0) ** (1.0 / am1)
    return p / p.sum(axis=-1, keepdims=True)


def entmax_backward(p: Array, upstream: Array, alpha: float) -> Array:
    """Gradient wrt z given p = entmax(z, alpha) and d loss / d p."""
    p = np.asarray(p, dtype=np.float64)
    s = np.where(p > 0, p ** (2.0 - alpha), 0.0)
    total = s.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise DomainError("entmax_backward: empty support")
    g = np.asarray(upstream, dtype=np.float64)
    return s * g - ((s * g).sum(axis=-1, keepdims=True) / total) * s


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def alpha_from_raw(raw: float) -> float:
    return 1.0 + _sigmoid(float(raw))


def raw_from_alpha(alpha: float) -> float:
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    q = alpha - 1.0
    return math.log(q / (1.0 - q))


def fd_bracket(alpha: float, step: float = ALPHA_FD_STEP) -> Tuple[float, float]:
    """Finite-difference points around alpha, clipped into the valid range."""
    return max(alpha - step, _ALPHA_FLOOR), min(alpha + step, _ALPHA_CEIL)


def alpha_grad(z: Array, raw: float, upstream: Array, step: float = ALPHA_FD_STEP) -> float:
    """d loss / d raw, with alpha = 1 + sigmoid(raw)."""
    alpha = alpha_from_raw(raw)
    lo, hi = fd_bracket(alpha, step)
    dp = (entmax(z, hi) - entmax(z, lo)) / (hi - lo)
    sig = alpha - 1.0
    return float((np.asarray(upstream) * dp).sum()) * sig * (1.0 - sig)


class AlphaParam(Module):
    """alpha = 1 + sigmoid(raw), kept strictly inside (1, 2)."""

    def __init__(self, init: float = 1.5) -> None:
        self.raw = Value.param(raw_from_alpha(init), name="alpha.raw")

    @property
    def value(self) -> float:
        return alpha_from_raw(float(self.raw.data))


def entmax_rows(z: Value, alpha: AlphaParam) -> Value:
    """Row-wise entmax as a tape op; differentiable wrt z and alpha.raw."""
    raw = alpha.raw
    a = alpha_from_raw(float(raw.data))
    p = entmax(z.data, a)

    def _rule(g: Array) -> Tuple[Array, Array]:
        return entmax_backward(p, g, a), np.asarray(alpha_grad(z.data, float(raw.data), g))

    return make_op("entmax", p, (z, raw), _rule)


def entmax_cols(z: Value, alpha: AlphaParam) -> Value:
    return transpose(entmax_rows(transpose(z), alpha))
