"""Central finite-difference oracle for the tape gradients."""

from __future__ import annotations

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from polar.core import Value, backward, no_grad, zero_grad

FD_STEP = 1e-5


def analytic_grads(loss_fn: Callable[[], Value], params: Sequence[Value]) -> List[np.ndarray]:
    zero_grad(params)
    backward(loss_fn())
    grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    zero_grad(params)
    return grads


def numeric_grad(
    loss_fn: Callable[[], Value],
    param: Value,
    eps: float = FD_STEP,
    indices: Optional[Sequence[Tuple[int, ...]]] = None,
) -> np.ndarray:
    out = np.zeros_like(param.data)
    for idx in indices if indices is not None else list(np.ndindex(param.data.shape)):
        orig = float(param.data[idx])
        with no_grad():
            param.data[idx] = orig + eps
            up = loss_fn().item()
            param.data[idx] = orig - eps
            down = loss_fn().item()
        param.data[idx] = orig
        out[idx] = (up - down) / (2.0 * eps)
    return out


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    diff = float(np.linalg.norm(a - b))
    if diff < 1e-9:
        return 0.0
    return diff / max(float(np.linalg.norm(a) + np.linalg.norm(b)), 1e-12)


def max_rel_error(
    loss_fn: Callable[[], Value],
    params: Sequence[Value],
    indices: Optional[Sequence[Optional[Sequence[Tuple[int, ...]]]]] = None,
) -> float:
    """Worst relative error over `params`; `indices` restricts the probed entries."""
    grads = analytic_grads(loss_fn, params)
    worst = 0.0
    for i, (p, g) in enumerate(zip(params, grads)):
        idx = indices[i] if indices is not None else None
        num = numeric_grad(loss_fn, p, indices=idx)
        if idx is not None:
            sel = tuple(np.array(idx).T)
            g, num = g[sel], num[sel]
        worst = max(worst, rel_error(g, num))
    return worst


def random_indices(rng: np.random.Generator, shape: Tuple[int, ...], n: int) -> List[Tuple[int, ...]]:
    flat = rng.choice(int(np.prod(shape)), size=min(n, int(np.prod(shape))), replace=False)
    return [tuple(int(v) for v in np.unravel_index(f, shape)) for f in flat]
