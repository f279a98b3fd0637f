"""GCN over the pruned latent graph and gated residual fusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from polar.core import Linear, Module, Value, add, concat, init_matrix, init_zeros, matmul, mul, relu, row_normalize, sigmoid, sub
from polar.errors import ConfigError, ShapeError


@dataclass(frozen=True)
class GcnConfig:
    layers: int = 2
    hidden: int = 350
    eps: float = 1e-6

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ConfigError(f"GCN needs at least one layer, got {self.layers}")
        if self.hidden < 1:
            raise ConfigError(f"GCN hidden size must be positive, got {self.hidden}")


def gcn_layer(r: Value, e: Value, weight: Value, bias: Value, eps: float = 1e-6) -> Value:
    """relu(D^-1 (E + I) R W + b), D = row sums of E + I guarded by eps."""
    k = r.shape[0]
    if e.shape != (k, k):
        raise ShapeError(f"gcn_layer: adjacency {e.shape} does not match {k} nodes")
    if r.shape[1] != weight.shape[0]:
        raise ShapeError(f"gcn_layer: incompatible shapes {r.shape} and {weight.shape}")
    a_bar = row_normalize(add(e, Value(np.eye(k))), eps)
    return relu(add(matmul(a_bar, matmul(r, weight)), bias))


class GcnLayer(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int) -> None:
        self.weight = init_matrix(rng, d_in, d_out)
        self.bias = init_zeros(d_out)

    def __call__(self, r: Value, e: Value, eps: float) -> Value:
        return gcn_layer(r, e, self.weight, self.bias, eps)


def gcn_stack(h: Value, e: Value, layers: Sequence[GcnLayer], eps: float = 1e-6) -> Value:
    r = h
    for layer in layers:
        r = layer(r, e, eps)
    return r


def gated_fusion(r: Value, h: Value, gate: Linear) -> Value:
    """g * r + (1 - g) * h with g = sigmoid(W2 [r ; h])."""
    if r.shape != h.shape:
        raise ShapeError(f"gated_fusion: incompatible shapes {r.shape} and {h.shape}")
    g = sigmoid(gate(concat([r, h])))
    return add(mul(g, r), mul(sub(1.0, g), h))


class GraphEncoder(Module):
    """GCN stack, alignment projection of H and the fusion step."""

    def __init__(self, rng: np.random.Generator, d_h: int, cfg: GcnConfig, gated: bool = True) -> None:
        self.cfg = cfg
        self.gated = gated
        dims = [d_h] + [cfg.hidden] * cfg.layers
        self.layers: List[GcnLayer] = [GcnLayer(rng, dims[i], dims[i + 1]) for i in range(cfg.layers)]
        self.align = Linear(rng, d_h, cfg.hidden) if d_h != cfg.hidden else None
        self.gate = Linear(rng, 2 * cfg.hidden, cfg.hidden) if gated else None

    def __call__(self, h: Value, e: Value) -> Value:
        r = gcn_stack(h, e, self.layers, self.cfg.eps)
        hh = self.align(h) if self.align is not None else h
        if self.gate is None:
            return add(r, hh)
        return gated_fusion(r, hh, self.gate)
