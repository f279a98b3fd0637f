"""Predicate-oriented latent graph induction.

H --(Gaussian-biased attention around the predicate)--> H'
H' --(two feed-forward heads)--> HardKuma shapes (A, B)
(A, B, noise) --> E_raw --(alpha-entmax)--> E_pruned
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from polar.core import (
    Array,
    Linear,
    Module,
    Value,
    add,
    matmul,
    mul,
    relu,
    row_normalize,
    softmax,
    softplus,
    transpose,
)
from polar.errors import ConfigError, DomainError, ShapeError
from polar.models.distributions import EVAL_NOISE, STRETCH_L, STRETCH_R, draw_noise, hardkuma_gate
from polar.models.sparse_map import AlphaParam, entmax, entmax_cols, entmax_rows

PARAM_EPS = 1e-4

STOCHASTIC = "stochastic"
DETERMINISTIC = "deterministic"

PRUNE_AXES = ("row", "col")
PARAM_NORMS = ("none", "row")


def gaussian_bias(k: int, prd_index: int) -> Array:
    """Log-space bias -pi * d^2, d = node-index distance to the predicate."""
    if not 0 <= prd_index < k:
        raise DomainError(f"gaussian_bias: predicate index {prd_index} outside [0, {k})")
    d = np.arange(k, dtype=np.float64) - prd_index
    return -math.pi * d * d


def pgi_attend(h: Value, prd_index: int) -> Tuple[Value, Array]:
    """Predicate-centered Gaussian attention. Returns (H', weights)."""
    k, d_h = h.shape
    bias = Value(gaussian_bias(k, prd_index))
    scores = add(mul(matmul(h, transpose(h)), 1.0 / math.sqrt(d_h)), bias)
    w = softmax(scores)
    return matmul(w, h), w.data


class ParamHeads(Module):
    """Two independent single-hidden-layer heads producing positive K x K shapes."""

    def __init__(self, rng: np.random.Generator, d_h: int, d_score: int, norm: str = "none") -> None:
        if norm not in PARAM_NORMS:
            raise ConfigError(f"param_norm must be one of {PARAM_NORMS}, got {norm!r}")
        self.norm = norm
        self.a_hidden = Linear(rng, d_h, d_h)
        self.a_out = Linear(rng, d_h, d_score)
        self.b_hidden = Linear(rng, d_h, d_h)
        self.b_out = Linear(rng, d_h, d_score)

    def scores(self, hp: Value) -> Tuple[Value, Value]:
        sa = self.a_out(relu(self.a_hidden(hp)))
        sb = self.b_out(relu(self.b_hidden(hp)))
        return matmul(sa, transpose(sa)), matmul(sb, transpose(sb))

    def positive(self, score: Value) -> Value:
        out = softplus(score)
        if self.norm == "row":
            # rows rescaled to mean 1
            out = mul(row_normalize(out, PARAM_EPS), float(score.shape[1]))
        return add(out, PARAM_EPS)

    def __call__(self, hp: Value) -> Tuple[Value, Value]:
        sa, sb = self.scores(hp)
        return self.positive(sa), self.positive(sb)


def induce(
    a: Value,
    b: Value,
    mode: str = DETERMINISTIC,
    rng: Optional[np.random.Generator] = None,
    shared_row_noise: bool = False,
) -> Value:
    """Edge strengths pi_ij = HardKuma(A_ij, B_ij; u_ij)."""
    if a.shape != b.shape:
        raise ShapeError(f"induce: shape parameters differ, {a.shape} and {b.shape}")
    if mode == DETERMINISTIC:
        u = np.full(a.shape, EVAL_NOISE)
    elif mode == STOCHASTIC:
        if rng is None:
            raise DomainError("induce: stochastic mode needs a random generator")
        u = draw_noise(rng, a.shape, shared_row=shared_row_noise)
    else:
        raise DomainError(f"induce: unknown mode {mode!r}")
    return hardkuma_gate(a, b, u, STRETCH_L, STRETCH_R)


def prune(e_raw: Value, alpha: AlphaParam, axis: str = "row") -> Value:
    if axis == "row":
        return entmax_rows(e_raw, alpha)
    if axis == "col":
        return entmax_cols(e_raw, alpha)
    raise ConfigError(f"prune axis must be one of {PRUNE_AXES}, got {axis!r}")


def prune_array(e_raw: Array, alpha: float, axis: str = "row") -> Array:
    """Non-differentiable pruning for a fixed alpha in (1, 2]."""
    if axis == "col":
        return entmax(np.asarray(e_raw).T, alpha).T
    return entmax(e_raw, alpha)


@dataclass
class LatentGraph:
    e_raw: Value
    e_pruned: Value
    alpha: Optional[AlphaParam]
    mode: str
    pruned: bool = True
    pgi_weights: Optional[Array] = None

    @property
    def K(self) -> int:
        return self.e_raw.shape[0]

    def support_sizes(self) -> Array:
        return (self.e_pruned.data > 0).sum(axis=1)


class PolarInducer(Module):
    def __init__(
        self,
        rng: np.random.Generator,
        d_h: int,
        d_score: int = 32,
        alpha_init: float = 1.5,
        use_pgi: bool = True,
        use_prune: bool = True,
        prune_axis: str = "row",
        param_norm: str = "none",
        shared_row_noise: bool = False,
    ) -> None:
        if prune_axis not in PRUNE_AXES:
            raise ConfigError(f"prune_axis must be one of {PRUNE_AXES}, got {prune_axis!r}")
        self.use_pgi = use_pgi
        self.use_prune = use_prune
        self.prune_axis = prune_axis
        self.shared_row_noise = shared_row_noise
        self.heads = ParamHeads(rng, d_h, d_score, param_norm)
        self.alpha = AlphaParam(alpha_init)

    def task_parameters(self):
        params = self.heads.parameters()
        if self.use_prune:
            params += self.alpha.parameters()
        return params

    def __call__(
        self,
        h: Value,
        prd_index: int,
        mode: str = DETERMINISTIC,
        rng: Optional[np.random.Generator] = None,
    ) -> LatentGraph:
        weights = None
        hp = h
        if self.use_pgi:
            hp, weights = pgi_attend(h, prd_index)
        a, b = self.heads(hp)
        e_raw = induce(a, b, mode, rng, self.shared_row_noise)
        if not self.use_prune:
            return LatentGraph(e_raw, e_raw, None, mode, pruned=False, pgi_weights=weights)
        e_pruned = prune(e_raw, self.alpha, self.prune_axis)
        return LatentGraph(e_raw, e_pruned, self.alpha, mode, pruned=True, pgi_weights=weights)
