"""Kumaraswamy and HardKuma (stretched + rectified Kumaraswamy) distributions.

The scalar/array functions are plain numpy; `hardkuma_gate` is the
differentiable edge sampler used by the latent-graph inducer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from polar.core import Array, Value, make_op
from polar.errors import DomainError, ShapeError

Real = Union[float, Array]

# Stretch bounds of the rectified distribution. The upper bound must exceed 1.
STRETCH_L = -0.1
STRETCH_R = 1.1
# Median noise used for deterministic (evaluation) edges.
EVAL_NOISE = 0.5
_GUARD = 1e-12
_NOISE_MARGIN = 1e-9


@dataclass(frozen=True)
class HardKumaParams:
    a: float
    b: float
    l: float = STRETCH_L
    r: float = STRETCH_R

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise DomainError(f"HardKuma shapes must be positive, got a={self.a}, b={self.b}")
        if not (self.l < 0 < 1 < self.r):
            raise DomainError(f"HardKuma stretch needs l < 0 < 1 < r, got l={self.l}, r={self.r}")


def _scalar_or_array(x: Array) -> Real:
    return float(x) if np.ndim(x) == 0 else x


def _check_shapes(a: Real, b: Real) -> None:
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise DomainError("Kumaraswamy shapes a and b must be positive")


def kuma_cdf(k: Real, a: Real, b: Real) -> Real:
    """1 - (1 - k^a)^b."""
    k = np.asarray(k, dtype=np.float64)
    if np.any(k < 0) or np.any(k > 1):
        raise DomainError("kuma_cdf: k must lie in [0, 1]")
    _check_shapes(a, b)
    inner = np.clip(1.0 - k**a, 0.0, 1.0)
    return _scalar_or_array(1.0 - inner**b)


def kuma_pdf(k: Real, a: Real, b: Real) -> Real:
    k = np.asarray(k, dtype=np.float64)
    if np.any(k <= 0) or np.any(k >= 1):
        raise DomainError("kuma_pdf: k must lie in (0, 1)")
    _check_shapes(a, b)
    return _scalar_or_array(a * b * k ** (a - 1.0) * (1.0 - k**a) ** (b - 1.0))


def kuma_icdf(u: Real, a: Real, b: Real) -> Real:
    """(1 - (1 - u)^(1/b))^(1/a)."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0) or np.any(u > 1):
        raise DomainError("kuma_icdf: u must lie in [0, 1]")
    _check_shapes(a, b)
    one_minus_u = np.clip(1.0 - u, _GUARD, 1.0)
    inner = 1.0 - one_minus_u ** (1.0 / np.asarray(b, dtype=np.float64))
    # inner == 0 exactly at u == 0; keep the boundary value exact
    inner = np.where(u == 0, 0.0, np.clip(inner, _GUARD, 1.0))
    return _scalar_or_array(inner ** (1.0 / np.asarray(a, dtype=np.float64)))


def stretch_rectify(k: Real, l: float = STRETCH_L, r: float = STRETCH_R) -> Tuple[Real, Real]:
    """Return (t, h): the stretched value and its hard-sigmoid rectification."""
    t = l + (r - l) * np.asarray(k, dtype=np.float64)
    return _scalar_or_array(t), _scalar_or_array(np.clip(t, 0.0, 1.0))


def hardkuma_sample(params: HardKumaParams, u: Real) -> Real:
    """Sample via inverse CDF, stretch to (l, r), rectify to [0, 1]."""
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0) or np.any(u_arr >= 1):
        raise DomainError("hardkuma_sample: noise u must lie in the open interval (0, 1)")
    k = kuma_icdf(u_arr, params.a, params.b)
    _, h = stretch_rectify(k, params.l, params.r)
    return h


def hardkuma_point_masses(params: HardKumaParams) -> Tuple[float, float]:
    """(P[h = 0], P[h = 1])."""
    span = params.r - params.l
    p0 = float(kuma_cdf(-params.l / span, params.a, params.b))
    p1 = 1.0 - float(kuma_cdf((1.0 - params.l) / span, params.a, params.b))
    return p0, p1


def hardkuma_density(h: Real, params: HardKumaParams) -> Real:
    """Continuous part of the HardKuma density on the open interval (0, 1)."""
    h = np.asarray(h, dtype=np.float64)
    if np.any(h <= 0) or np.any(h >= 1):
        raise DomainError("hardkuma_density: h must lie in (0, 1)")
    span = params.r - params.l
    return _scalar_or_array(np.asarray(kuma_pdf((h - params.l) / span, params.a, params.b)) / span)


# -----------------
# Differentiable sampler
# -----------------


def draw_noise(rng: np.random.Generator, shape: Tuple[int, ...], shared_row: bool = False) -> Array:
    """Uniform noise strictly inside (0, 1); optionally one draw per row."""
    if shared_row:
        u = np.repeat(rng.random((shape[0], 1)), shape[1], axis=1)
    else:
        u = rng.random(shape)
    return np.clip(u, _NOISE_MARGIN, 1.0 - _NOISE_MARGIN)


def hardkuma_gate(a: Value, b: Value, u: Array, l: float = STRETCH_L, r: float = STRETCH_R) -> Value:
    """Elementwise HardKuma sample h(a, b; u) with reparameterized gradients.

    Gradients flow to `a` and `b` where the stretched value lies strictly
    inside (0, 1); rectified entries have zero gradient.
    """

    u = np.asarray(u, dtype=np.float64)
    if a.shape != b.shape or a.shape != u.shape:
        raise ShapeError(f"hardkuma_gate: incompatible shapes {a.shape}, {b.shape} and noise {u.shape}")
    if np.any(a.data <= 0) or np.any(b.data <= 0):
        raise DomainError("hardkuma_gate: shape parameters must be positive")
    if np.any(u <= 0) or np.any(u >= 1):
        raise DomainError("hardkuma_gate: noise must lie in (0, 1)")

    A, B = a.data, b.data
    one_minus_u = np.clip(1.0 - u, _GUARD, 1.0)
    log_1mu = np.log(one_minus_u)
    c = one_minus_u ** (1.0 / B)
    m = np.clip(1.0 - c, _GUARD, 1.0)
    k = m ** (1.0 / A)
    t = l + (r - l) * k
    h = np.clip(t, 0.0, 1.0)
    interior = (t > 0.0) & (t < 1.0)

    def _rule(g: Array) -> Tuple[Array, Array]:
        dk_da = -k * np.log(m) / (A * A)
        dk_db = (k / (A * m)) * c * log_1mu / (B * B)
        scale = g * interior * (r - l)
        return scale * dk_da, scale * dk_db

    return make_op("hardkuma", h, (a, b), _rule)
