"""BIO tagset, softmax classifier, cross-entropy loss and constrained Viterbi."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from polar.core import Array, Linear, Module, Value, log_softmax, nll_loss
from polar.errors import DomainError, ShapeError

OUTSIDE = "O"

# (role, start, end) with inclusive end, in node coordinates
NodeSpan = Tuple[str, int, int]


@dataclass(frozen=True)
class Tagset:
    roles: Tuple[str, ...]
    labels: Tuple[str, ...] = field(init=False)
    index: Dict[str, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if len(set(self.roles)) != len(self.roles):
            raise DomainError(f"Tagset: duplicate roles in {self.roles}")
        labels = [OUTSIDE]
        for role in self.roles:
            labels += [f"B-{role}", f"I-{role}"]
        object.__setattr__(self, "labels", tuple(labels))
        object.__setattr__(self, "index", {lab: i for i, lab in enumerate(labels)})

    @classmethod
    def from_roles(cls, roles: Sequence[str]) -> "Tagset":
        return cls(tuple(roles))

    def __len__(self) -> int:
        return len(self.labels)

    def encode(self, labels: Sequence[str]) -> List[int]:
        try:
            return [self.index[lab] for lab in labels]
        except KeyError as exc:
            raise DomainError(f"Tagset: unknown label {exc.args[0]!r}") from None

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.labels[i] for i in ids]


@dataclass(frozen=True)
class TransitionMask:
    allowed: Array  # (n, n) bool, [prev, cur]
    start: Array  # (n,) bool

    @classmethod
    def bio(cls, tagset: Tagset) -> "TransitionMask":
        n = len(tagset)
        allowed = np.ones((n, n), dtype=bool)
        start = np.ones(n, dtype=bool)
        for cur, lab in enumerate(tagset.labels):
            if not lab.startswith("I-"):
                continue
            role = lab[2:]
            start[cur] = False
            allowed[:, cur] = False
            allowed[tagset.index[f"B-{role}"], cur] = True
            allowed[cur, cur] = True
        return cls(allowed=allowed, start=start)

    def is_valid(self, ids: Sequence[int]) -> bool:
        if not ids:
            return True
        if not self.start[ids[0]]:
            return False
        return all(self.allowed[p, c] for p, c in zip(ids[:-1], ids[1:]))


class Classifier(Module):
    """Linear map followed by row log-softmax."""

    def __init__(self, rng: np.random.Generator, d_in: int, n_labels: int) -> None:
        self.proj = Linear(rng, d_in, n_labels)

    def __call__(self, feats: Value) -> Value:
        return log_softmax(self.proj(feats))


def sequence_loss(log_probs: Value, gold: Sequence[int]) -> Value:
    """-(1/K) sum_j log p(y_j)."""
    if len(gold) != log_probs.shape[0]:
        raise ShapeError(f"sequence_loss: {log_probs.shape[0]} positions but {len(gold)} gold labels")
    return nll_loss(log_probs, gold)


def viterbi_decode(emissions: Array, mask: TransitionMask, allowed: Optional[Array] = None) -> List[int]:
    """Best BIO-valid label sequence under emission scores.

    `allowed` optionally restricts labels per position (K, n). Equal-scoring
    predecessors and final labels resolve to the lower label index, step by
    step; among several optimal full paths the one returned is not otherwise
    specified.
    """

    em = np.asarray(emissions, dtype=np.float64)
    if em.ndim != 2 or em.shape[1] != mask.start.shape[0]:
        raise ShapeError(f"viterbi_decode: emissions {em.shape} do not match {mask.start.shape[0]} labels")
    k, n = em.shape
    if k == 0:
        return []
    if allowed is not None:
        em = np.where(allowed, em, -np.inf)
    trans = np.where(mask.allowed, 0.0, -np.inf)

    score = em[0] + np.where(mask.start, 0.0, -np.inf)
    back = np.zeros((k, n), dtype=np.int64)
    cols = np.arange(n)
    for t in range(1, k):
        cand = score[:, None] + trans
        best = np.argmax(cand, axis=0)
        back[t] = best
        score = cand[best, cols] + em[t]

    path = [int(np.argmax(score))]
    for t in range(k - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path


def spans_from_tags(labels: Sequence[str]) -> List[NodeSpan]:
    """Extract (role, start, end) spans; a stray I-X opens a new span."""
    spans: List[NodeSpan] = []
    role: Optional[str] = None
    start = 0
    for i, lab in enumerate(labels):
        if lab.startswith("I-") and role == lab[2:]:
            continue
        if role is not None:
            spans.append((role, start, i - 1))
            role = None
        if lab.startswith("B-") or lab.startswith("I-"):
            role, start = lab[2:], i
    if role is not None:
        spans.append((role, start, len(labels) - 1))
    return spans


def tags_from_spans(spans: Sequence[NodeSpan], length: int) -> List[str]:
    labels = [OUTSIDE] * length
    for role, start, end in sorted(spans, key=lambda s: (s[1], s[2])):
        if not 0 <= start <= end < length:
            raise DomainError(f"tags_from_spans: span ({role}, {start}, {end}) outside length {length}")
        if any(lab != OUTSIDE for lab in labels[start : end + 1]):
            raise DomainError(f"tags_from_spans: span ({role}, {start}, {end}) overlaps another span")
        labels[start] = f"B-{role}"
        for j in range(start + 1, end + 1):
            labels[j] = f"I-{role}"
    return labels
