"""Span-level scoring of predicted role spans against gold.

A predicted span counts only on exact match of role, utterance and both token
boundaries. Spans are split into intra (same utterance as the predicate) and
cross (earlier utterance); cross spans are further grouped by how many
utterances separate them from the predicate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Set, Tuple

from polar.dialogue import Dialogue, RoleSpan, linearize
from polar.errors import EvaluationError

DISTANCE_BUCKETS = ("1", "2", "3+")
TOKEN_BUCKETS = ("0-4", "5-9", "10-19", "20+")

SpanKey = Tuple[int, int, int, str]


@dataclass
class PRF:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    def add(self, other: "PRF") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn

    def to_dict(self) -> Dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "support": self.support,
        }


@dataclass
class DistanceRow:
    support: int = 0
    hits: int = 0

    @property
    def error_rate(self) -> float:
        # miss rate; 0 when nothing to miss
        return 1.0 - self.hits / self.support if self.support else 0.0

    def to_dict(self) -> Dict[str, float]:
        return {"support": self.support, "hits": self.hits, "error_rate": self.error_rate}


@dataclass
class EvalReport:
    all: PRF = field(default_factory=PRF)
    cross: PRF = field(default_factory=PRF)
    intra: PRF = field(default_factory=PRF)
    by_distance: Dict[str, DistanceRow] = field(default_factory=lambda: {b: DistanceRow() for b in DISTANCE_BUCKETS})
    by_utterances: Dict[int, PRF] = field(default_factory=dict)
    by_token_distance: Dict[str, PRF] = field(default_factory=lambda: {b: PRF() for b in TOKEN_BUCKETS})
    n_dialogues: int = 0

    @property
    def f1_all(self) -> float:
        return self.all.f1

    @property
    def f1_cross(self) -> float:
        return self.cross.f1

    @property
    def f1_intra(self) -> float:
        return self.intra.f1

    def to_dict(self) -> dict:
        return {
            "n_dialogues": self.n_dialogues,
            "all": self.all.to_dict(),
            "cross": self.cross.to_dict(),
            "intra": self.intra.to_dict(),
            "by_distance": {k: v.to_dict() for k, v in self.by_distance.items()},
            "by_utterances": {str(k): v.to_dict() for k, v in sorted(self.by_utterances.items())},
            "by_token_distance": {k: v.to_dict() for k, v in self.by_token_distance.items()},
        }

    def render_table(self) -> List[str]:
        lines = [
            f"dialogues: {self.n_dialogues}",
            "",
            f"{'subset':<10}{'P':>8}{'R':>8}{'F1':>8}{'support':>9}",
        ]
        for name, prf in (("all", self.all), ("cross", self.cross), ("intra", self.intra)):
            lines.append(f"{name:<10}{prf.precision:>8.4f}{prf.recall:>8.4f}{prf.f1:>8.4f}{prf.support:>9d}")
        lines += ["", f"{'distance':<10}{'support':>9}{'hits':>7}{'error':>8}"]
        for name, row in self.by_distance.items():
            lines.append(f"{name:<10}{row.support:>9d}{row.hits:>7d}{row.error_rate:>8.4f}")
        lines += ["", f"{'utts':<10}{'F1':>8}{'support':>9}"]
        for n, prf in sorted(self.by_utterances.items()):
            lines.append(f"{n:<10}{prf.f1:>8.4f}{prf.support:>9d}")
        lines += ["", f"{'tokens':<10}{'F1':>8}{'support':>9}"]
        for name, prf in self.by_token_distance.items():
            lines.append(f"{name:<10}{prf.f1:>8.4f}{prf.support:>9d}")
        return lines


def utterance_bucket(distance: int) -> str:
    return "3+" if distance >= 3 else str(distance)


def token_bucket(distance: int) -> str:
    if distance < 5:
        return "0-4"
    if distance < 10:
        return "5-9"
    if distance < 20:
        return "10-19"
    return "20+"


def _keys(spans: Iterable[RoleSpan]) -> Set[SpanKey]:
    return {(s.utt, s.start, s.end, s.role) for s in spans}


def _score(pred: Set[SpanKey], gold: Set[SpanKey]) -> PRF:
    tp = len(pred & gold)
    return PRF(tp, len(pred) - tp, len(gold) - tp)


def _index(dialogues: Sequence[Dialogue], what: str) -> Dict[str, Dialogue]:
    out: Dict[str, Dialogue] = {}
    for d in dialogues:
        if d.dialogue_id in out:
            raise EvaluationError(f"duplicate dialogue id {d.dialogue_id!r} in {what}")
        out[d.dialogue_id] = d
    return out


def _check_spans(pred: Dialogue, gold: Dialogue) -> None:
    for s in pred.roles:
        if not 0 <= s.utt < len(gold.utterances):
            raise EvaluationError(f"{pred.dialogue_id}: predicted span {s} names utterance {s.utt}, dialogue has {len(gold.utterances)}")
        n = len(gold.utterances[s.utt].tokens)
        if not 0 <= s.start <= s.end < n:
            raise EvaluationError(f"{pred.dialogue_id}: predicted span {s} lies outside utterance {s.utt} of {n} tokens")


def evaluate(predictions: Sequence[Dialogue], gold: Sequence[Dialogue]) -> EvalReport:
    """Score predictions aligned to gold by dialogue id."""
    pred_by_id = _index(predictions, "predictions")
    gold_by_id = _index(gold, "gold")
    missing = sorted(set(gold_by_id) - set(pred_by_id))
    extra = sorted(set(pred_by_id) - set(gold_by_id))
    if missing or extra:
        raise EvaluationError(
            f"unmatched dialogue ids: {len(missing)} without prediction {missing[:3]}, "
            f"{len(extra)} without gold {extra[:3]}"
        )

    report = EvalReport(n_dialogues=len(gold_by_id))
    for did in sorted(gold_by_id):
        g, p = gold_by_id[did], pred_by_id[did]
        _check_spans(p, g)
        p_utt = g.predicate[0]
        g_keys, p_keys = _keys(g.roles), _keys(p.roles)

        report.all.add(_score(p_keys, g_keys))
        report.intra.add(_score({k for k in p_keys if k[0] == p_utt}, {k for k in g_keys if k[0] == p_utt}))
        report.cross.add(_score({k for k in p_keys if k[0] != p_utt}, {k for k in g_keys if k[0] != p_utt}))

        for k in g_keys:
            if k[0] == p_utt:
                continue
            row = report.by_distance[utterance_bucket(p_utt - k[0])]
            row.support += 1
            row.hits += int(k in p_keys)

        n_utt = len(g.utterances)
        report.by_utterances.setdefault(n_utt, PRF()).add(_score(p_keys, g_keys))

        seq = linearize(g.with_roles(()))
        prd = seq.predicate_index

        def _tok_bucket(k: SpanKey) -> str:
            a, b = seq.node_of(k[0], k[1]), seq.node_of(k[0], k[2])
            return token_bucket(0 if a <= prd <= b else min(abs(a - prd), abs(b - prd)))

        for bucket in TOKEN_BUCKETS:
            report.by_token_distance[bucket].add(
                _score({k for k in p_keys if _tok_bucket(k) == bucket}, {k for k in g_keys if _tok_bucket(k) == bucket})
            )
    return report
