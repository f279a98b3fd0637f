"""Numerics core: a small reverse-mode differentiation engine on float64 numpy
arrays, plus the Adam optimizer every learnable part of the model builds on.

Each op computes its output eagerly and, when any input requires gradients,
appends a record (inputs, output, backward rule) to the thread-local tape.
`backward(loss)` walks the tape in reverse recording order, which is a
topological order by construction, then clears it.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from polar.errors import NumericalError, ShapeError, TapeError

Array = np.ndarray
Operand = Union["Value", float, int, Array]
BackwardRule = Callable[[Array], Sequence[Optional[Array]]]


class Value:
    """A float64 array node. Parameters are leaves with `requires_grad=True`."""

    __slots__ = ("data", "requires_grad", "grad", "name", "op")

    def __init__(self, data: Union[Array, float, Sequence], requires_grad: bool = False, name: str = "") -> None:
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[Array] = None
        self.name = name
        self.op = ""

    @classmethod
    def param(cls, data: Union[Array, float, Sequence], name: str = "") -> "Value":
        return cls(np.array(data, dtype=np.float64), requires_grad=True, name=name)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: expected a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Value{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operators
    def __add__(self, other: Operand) -> "Value":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Value":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Value":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Value":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Value":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Value":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Value":
        return div(self, other)

    def __neg__(self) -> "Value":
        return neg(self)

    def __matmul__(self, other: "Value") -> "Value":
        return matmul(self, other)

    def __pow__(self, exponent: float) -> "Value":
        return power(self, exponent)

    @property
    def T(self) -> "Value":
        return transpose(self)


# -----------------
# Tape
# -----------------


@dataclass
class _Record:
    op: str
    inputs: Tuple[Value, ...]
    output: Value
    backward: BackwardRule


class Tape:
    """Ordered op records; inputs of a record always precede it."""

    def __init__(self) -> None:
        self.records: List[_Record] = []
        self._outputs: set = set()

    def __len__(self) -> int:
        return len(self.records)

    def record(self, rec: _Record) -> None:
        self.records.append(rec)
        self._outputs.add(id(rec.output))

    def contains(self, value: Value) -> bool:
        return id(value) in self._outputs

    def clear(self) -> None:
        self.records = []
        self._outputs = set()


_local = threading.local()


def current_tape() -> Tape:
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = Tape()
        _local.tape = tape
    return tape


def grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording them (inference, evaluation threads)."""
    prev = grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = prev


def _lift(x: Operand) -> Value:
    return x if isinstance(x, Value) else Value(x)


def make_op(op: str, data: Array, inputs: Sequence[Value], rule: BackwardRule) -> Value:
    """Wrap a computed array as the output of `op` and record its backward rule.

    `rule(grad_out)` returns one gradient (or None) per input, in input order.
    """

    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise NumericalError(f"{op}: non-finite values in forward output")
    needs = grad_enabled() and any(v.requires_grad for v in inputs)
    out = Value(data, requires_grad=needs)
    out.op = op
    if needs:
        current_tape().record(_Record(op, tuple(inputs), out, rule))
    return out


def backward(loss: Value) -> None:
    """Populate `.grad` of every requires_grad Value reachable from `loss`."""

    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    tape = current_tape()
    if not tape.contains(loss):
        raise TapeError("backward: loss is not on the current tape (already back-propagated, or built under no_grad)")

    loss.grad = np.ones_like(loss.data)
    for rec in reversed(tape.records):
        g = rec.output.grad
        if g is None:
            continue
        grads = rec.backward(g)
        for inp, gi in zip(rec.inputs, grads):
            if gi is None or not inp.requires_grad:
                continue
            gi = np.asarray(gi, dtype=np.float64)
            if gi.shape != inp.data.shape:
                raise ShapeError(f"{rec.op}: backward produced gradient of shape {gi.shape} for input of shape {inp.shape}")
            if not np.all(np.isfinite(gi)):
                raise NumericalError(f"{rec.op}: non-finite gradient")
            inp.grad = gi if inp.grad is None else inp.grad + gi
    tape.clear()


def zero_grad(params: Sequence[Value]) -> None:
    for p in params:
        p.grad = None


# -----------------
# Shape helpers
# -----------------


def _check_broadcast(op: str, a: Value, b: Value) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb or sa == () or sb == ():
        return
    if len(sb) == 1 and len(sa) >= 1 and sa[-1] == sb[0]:
        return
    if len(sa) == 1 and len(sb) >= 1 and sb[-1] == sa[0]:
        return
    raise ShapeError(f"{op}: incompatible shapes {sa} and {sb}")


def _unbroadcast(grad: Array, shape: Tuple[int, ...]) -> Array:
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.asarray(grad.sum())
    return grad.reshape(-1, shape[0]).sum(axis=0)


# -----------------
# Elementwise and linear ops
# -----------------


def add(a: Operand, b: Operand) -> Value:
    a, b = _lift(a), _lift(b)
    _check_broadcast("add", a, b)
    return make_op("add", a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Operand, b: Operand) -> Value:
    a, b = _lift(a), _lift(b)
    _check_broadcast("sub", a, b)
    return make_op("sub", a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def neg(a: Value) -> Value:
    return make_op("neg", -a.data, (a,), lambda g: (-g,))


def mul(a: Operand, b: Operand) -> Value:
    a, b = _lift(a), _lift(b)
    _check_broadcast("mul", a, b)
    return make_op(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Operand, b: Operand) -> Value:
    a, b = _lift(a), _lift(b)
    _check_broadcast("div", a, b)
    out = a.data / b.data

    def _rule(g: Array) -> Tuple[Array, Array]:
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return make_op("div", out, (a, b), _rule)


def matmul(a: Value, b: Value) -> Value:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return make_op("matmul", a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a: Value) -> Value:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {a.shape}")
    return make_op("transpose", a.data.T, (a,), lambda g: (g.T,))


def concat(values: Sequence[Value], axis: int = -1) -> Value:
    """Concatenate on the last axis."""
    if axis not in (-1, values[0].data.ndim - 1):
        raise ShapeError("concat: only the last axis is supported")
    lead = values[0].shape[:-1]
    for v in values[1:]:
        if v.shape[:-1] != lead:
            raise ShapeError(f"concat: incompatible shapes {values[0].shape} and {v.shape}")
    widths = [v.shape[-1] for v in values]
    offsets = np.cumsum([0] + widths)

    def _rule(g: Array) -> List[Array]:
        return [g[..., offsets[i] : offsets[i + 1]] for i in range(len(values))]

    return make_op("concat", np.concatenate([v.data for v in values], axis=-1), tuple(values), _rule)


def slice_cols(a: Value, start: int, stop: int) -> Value:
    if not 0 <= start < stop <= a.shape[-1]:
        raise ShapeError(f"slice_cols: range [{start}, {stop}) outside width {a.shape[-1]}")

    def _rule(g: Array) -> Tuple[Array]:
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        return (full,)

    return make_op("slice_cols", a.data[..., start:stop], (a,), _rule)


def take_rows(table: Value, index: Sequence[int]) -> Value:
    """Row gather (embedding lookup)."""
    idx = np.asarray(index, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError(f"take_rows: expected a matrix table, got shape {table.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"take_rows: index out of range for table of {table.shape[0]} rows")

    def _rule(g: Array) -> Tuple[Array]:
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return make_op("take_rows", table.data[idx], (table,), _rule)


# -----------------
# Nonlinearities
# -----------------


def _sigmoid(x: Array) -> Array:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def relu(a: Value) -> Value:
    mask = a.data > 0
    return make_op("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: Value) -> Value:
    out = _sigmoid(a.data)
    return make_op("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a: Value) -> Value:
    return make_op("softplus", np.logaddexp(0.0, a.data), (a,), lambda g: (g * _sigmoid(a.data),))


def exp(a: Value) -> Value:
    out = np.exp(a.data)
    return make_op("exp", out, (a,), lambda g: (g * out,))


def log(a: Value) -> Value:
    if np.any(a.data <= 0):
        raise NumericalError("log: non-positive input")
    return make_op("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def power(a: Value, exponent: float) -> Value:
    p = float(exponent)
    return make_op("power", a.data**p, (a,), lambda g: (g * p * a.data ** (p - 1.0),))


def softmax(a: Value) -> Value:
    """Row softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def _rule(g: Array) -> Tuple[Array]:
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return make_op("softmax", out, (a,), _rule)


def log_softmax(a: Value) -> Value:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    probs = np.exp(out)

    def _rule(g: Array) -> Tuple[Array]:
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return make_op("log_softmax", out, (a,), _rule)


def dropout(a: Value, rate: float, rng: Optional[np.random.Generator], train: bool) -> Value:
    """Inverted dropout; identity outside training."""
    if not train or rate <= 0.0:
        return a
    if rng is None:
        raise TapeError("dropout: train mode needs an explicit random generator")
    keep = (rng.random(a.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return make_op("dropout", a.data * keep, (a,), lambda g: (g * keep,))


def layer_norm(x: Value, gain: Value, bias: Value, eps: float = 1e-5) -> Value:
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    sigma = np.sqrt((xc**2).mean(axis=-1, keepdims=True) + eps)
    xhat = xc / sigma

    def _rule(g: Array) -> Tuple[Array, Array, Array]:
        dxhat = g * gain.data
        dx = (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)) / sigma
        return dx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return make_op("layer_norm", xhat * gain.data + bias.data, (x, gain, bias), _rule)


def row_normalize(a: Value, eps: float) -> Value:
    """n_ij = a_ij / max(sum_j a_ij, eps)."""
    if a.data.ndim != 2:
        raise ShapeError(f"row_normalize: expected a matrix, got shape {a.shape}")
    raw = a.data.sum(axis=1, keepdims=True)
    clamped = raw <= eps
    s = np.where(clamped, eps, raw)
    out = a.data / s

    def _rule(g: Array) -> Tuple[Array]:
        coupling = np.where(clamped, 0.0, (g * a.data).sum(axis=1, keepdims=True) / (s * s))
        return (g / s - coupling,)

    return make_op("row_normalize", out, (a,), _rule)


# -----------------
# Reductions and losses
# -----------------


def sum_all(a: Value) -> Value:
    return make_op("sum", np.asarray(a.data.sum()), (a,), lambda g: (np.full(a.shape, float(g)),))


def mean_all(a: Value) -> Value:
    n = max(a.data.size, 1)
    return make_op("mean", np.asarray(a.data.mean()), (a,), lambda g: (np.full(a.shape, float(g) / n),))


def nll_loss(log_probs: Value, targets: Sequence[int]) -> Value:
    """Mean negative log-likelihood of `targets` under row log-probabilities."""
    tgt = np.asarray(targets, dtype=np.int64)
    n, c = log_probs.shape
    if tgt.shape != (n,):
        raise ShapeError(f"nll_loss: {n} rows but {tgt.shape[0] if tgt.ndim else 0} targets")
    onehot = np.zeros((n, c))
    onehot[np.arange(n), tgt] = 1.0
    return neg(sum_all(mul(log_probs, onehot))) * (1.0 / n)


# -----------------
# Parameters
# -----------------


def init_matrix(rng: np.random.Generator, rows: int, cols: int, name: str = "") -> Value:
    """Glorot-normal initialized parameter."""
    std = math.sqrt(2.0 / (rows + cols))
    return Value.param(rng.normal(0.0, std, size=(rows, cols)), name=name)


def init_zeros(*shape: int, name: str = "") -> Value:
    return Value.param(np.zeros(shape), name=name)


class Module:
    """Parameter container; walks attributes in definition order."""

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Value]]:
        for key, attr in vars(self).items():
            if isinstance(attr, Value) and attr.requires_grad:
                yield prefix + key, attr
            elif isinstance(attr, Module):
                yield from attr.named_parameters(f"{prefix}{key}.")
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self) -> List[Value]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, Array]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, Array]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        if missing:
            raise ShapeError(f"load_state_dict: missing parameters {missing[:5]}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ShapeError(f"load_state_dict: {name} has shape {arr.shape}, expected {p.data.shape}")
            p.data = arr.copy()
            p.grad = None


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, bias: bool = True) -> None:
        self.weight = init_matrix(rng, d_in, d_out)
        self.bias = init_zeros(d_out) if bias else None

    def __call__(self, x: Value) -> Value:
        y = matmul(x, self.weight)
        return y if self.bias is None else add(y, self.bias)


# -----------------
# Optimizer
# -----------------


@dataclass
class AdamState:
    lr: float = 5e-4
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: List[Array] = field(default_factory=list)
    v: List[Array] = field(default_factory=list)


def adam_step(params: Sequence[Value], state: AdamState) -> None:
    """One Adam update with decoupled weight decay; zeroes the gradients."""

    missing = [p.name or f"#{i}" for i, p in enumerate(params) if p.grad is None]
    if missing:
        raise TapeError(f"adam_step: no gradient for parameter(s) {', '.join(missing[:5])}")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ShapeError(f"adam_step: state tracks {len(state.m)} parameters, got {len(params)}")

    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, m, v in zip(params, state.m, state.v):
        if m.shape != p.data.shape:
            raise ShapeError(f"adam_step: moment shape {m.shape} does not match parameter {p.data.shape}")
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + state.eps) + state.weight_decay * p.data
        p.data = p.data - state.lr * update
        p.grad = None
