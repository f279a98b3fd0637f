"""Dialogue records and their linearization into the latent-graph node set."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from polar.errors import CorpusError
from polar.models.tagger import NodeSpan, spans_from_tags, tags_from_spans

WORD = "word"
SPEAKER = "speaker"


def speaker_surface(speaker: int) -> str:
    return f"<spk{speaker}>"


@dataclass(frozen=True)
class Utterance:
    speaker: int
    tokens: Tuple[str, ...]


@dataclass(frozen=True, order=True)
class RoleSpan:
    """Argument span in utterance coordinates; `end` is inclusive."""

    utt: int
    start: int
    end: int
    role: str


@dataclass(frozen=True)
class PronounLabel:
    utt: int
    idx: int
    referent: int


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    utterances: Tuple[Utterance, ...]
    predicate: Tuple[int, int]
    roles: Tuple[RoleSpan, ...] = ()
    pronouns: Tuple[PronounLabel, ...] = ()

    @property
    def speakers(self) -> Tuple[int, ...]:
        return tuple(sorted({u.speaker for u in self.utterances}))

    def validate(self, roles: Optional[Iterable[str]] = None) -> None:
        """Raise CorpusError naming the first violated rule."""
        if not self.utterances:
            raise CorpusError("empty-dialogue", f"{self.dialogue_id}: no utterances")
        for i, u in enumerate(self.utterances):
            if not u.tokens:
                raise CorpusError("empty-utterance", f"{self.dialogue_id}: utterance {i} has no tokens")
            if u.speaker < 0:
                raise CorpusError("speaker-id", f"{self.dialogue_id}: negative speaker id {u.speaker}")

        p_utt, p_idx = self.predicate
        last = len(self.utterances) - 1
        if p_utt != last:
            raise CorpusError(
                "predicate-in-last-utterance",
                f"{self.dialogue_id}: predicate in utterance {p_utt}, expected the current utterance {last}",
            )
        if not 0 <= p_idx < len(self.utterances[last].tokens):
            raise CorpusError("predicate-in-last-utterance", f"{self.dialogue_id}: predicate token {p_idx} out of range")

        known = set(roles) if roles is not None else None
        taken: Dict[Tuple[int, int], RoleSpan] = {}
        for span in self.roles:
            if known is not None and span.role not in known:
                raise CorpusError("unknown-role", f"{self.dialogue_id}: role {span.role!r} not in inventory")
            if not 0 <= span.utt < len(self.utterances):
                raise CorpusError("span-in-range", f"{self.dialogue_id}: span utterance {span.utt} out of range")
            n_tok = len(self.utterances[span.utt].tokens)
            if not 0 <= span.start <= span.end < n_tok:
                raise CorpusError(
                    "span-in-range",
                    f"{self.dialogue_id}: span {span.role} [{span.start}, {span.end}] outside utterance {span.utt} of {n_tok} tokens",
                )
            for j in range(span.start, span.end + 1):
                if (span.utt, j) in taken:
                    raise CorpusError("span-overlap", f"{self.dialogue_id}: spans overlap at utterance {span.utt} token {j}")
                taken[(span.utt, j)] = span

        for pr in self.pronouns:
            if not 0 <= pr.utt < len(self.utterances) or not 0 <= pr.idx < len(self.utterances[pr.utt].tokens):
                raise CorpusError("pronoun-in-range", f"{self.dialogue_id}: pronoun at ({pr.utt}, {pr.idx}) out of range")

    # -----------------
    # Record I/O
    # -----------------

    def to_record(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "utterances": [{"speaker": u.speaker, "tokens": list(u.tokens)} for u in self.utterances],
            "predicate": {"utt": self.predicate[0], "idx": self.predicate[1]},
            "roles": [{"role": s.role, "utt": s.utt, "start": s.start, "end": s.end} for s in self.roles],
            "pronouns": [{"utt": p.utt, "idx": p.idx, "referent": p.referent} for p in self.pronouns],
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Dialogue":
        try:
            did = str(rec["dialogue_id"])
        except KeyError:
            raise CorpusError("missing-field", "record has no dialogue_id") from None
        pred = rec.get("predicate")
        if not pred:
            raise CorpusError("missing-predicate", f"{did}: record has no predicate")
        try:
            utts = tuple(Utterance(int(u["speaker"]), tuple(str(t) for t in u["tokens"])) for u in rec.get("utterances", []))
            spans = tuple(
                RoleSpan(int(s["utt"]), int(s["start"]), int(s["end"]), str(s["role"])) for s in rec.get("roles", []) or []
            )
            prons = tuple(
                PronounLabel(int(p["utt"]), int(p["idx"]), int(p["referent"])) for p in rec.get("pronouns", []) or []
            )
            predicate = (int(pred["utt"]), int(pred["idx"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError("malformed-record", f"{did}: {exc.__class__.__name__}: {exc}") from None
        return cls(did, utts, predicate, spans, prons)

    def with_roles(self, roles: Sequence[RoleSpan]) -> "Dialogue":
        return Dialogue(self.dialogue_id, self.utterances, self.predicate, tuple(sorted(roles)), self.pronouns)


# -----------------
# Linearization
# -----------------


@dataclass(frozen=True)
class Node:
    kind: str
    surface: str
    utt: int
    speaker: int
    position: int
    is_predicate: bool = False
    token: int = -1  # index inside the utterance; -1 for speaker nodes
    referent: Optional[int] = None  # pronoun referent speaker, when labeled


@dataclass(frozen=True)
class NodeSequence:
    dialogue_id: str
    nodes: Tuple[Node, ...]
    labels: Tuple[str, ...]
    predicate_index: int
    n_utterances: int
    _lookup: Dict[Tuple[int, int], int] = field(default_factory=dict, compare=False, repr=False)

    @property
    def K(self) -> int:
        return len(self.nodes)

    def node_of(self, utt: int, token: int) -> int:
        return self._lookup[(utt, token)]

    def speaker_mask(self) -> np.ndarray:
        return np.array([n.kind == SPEAKER for n in self.nodes], dtype=bool)

    def pronoun_targets(self) -> Tuple[List[int], List[int]]:
        """(node indices, referent speakers) of labeled pronouns."""
        idx = [i for i, n in enumerate(self.nodes) if n.referent is not None]
        return idx, [int(self.nodes[i].referent) for i in idx]

    def node_spans(self) -> List[NodeSpan]:
        return spans_from_tags(self.labels)

    def to_role_spans(self, spans: Sequence[NodeSpan]) -> List[RoleSpan]:
        """Map node-coordinate spans back to utterance coordinates.

        Spans touching a speaker node or crossing an utterance are dropped.
        """

        out: List[RoleSpan] = []
        for role, start, end in spans:
            first, last = self.nodes[start], self.nodes[end]
            if first.utt != last.utt or any(self.nodes[i].kind == SPEAKER for i in range(start, end + 1)):
                continue
            out.append(RoleSpan(first.utt, first.token, last.token, role))
        return sorted(out)


def linearize(dialogue: Dialogue) -> NodeSequence:
    """Flatten utterances (speaker node first) and project gold roles to BIO."""
    dialogue.validate()
    pron = {(p.utt, p.idx): p.referent for p in dialogue.pronouns}
    p_utt, p_idx = dialogue.predicate

    nodes: List[Node] = []
    lookup: Dict[Tuple[int, int], int] = {}
    predicate_index = -1
    for ui, u in enumerate(dialogue.utterances):
        nodes.append(Node(SPEAKER, speaker_surface(u.speaker), ui, u.speaker, len(nodes)))
        for ti, tok in enumerate(u.tokens):
            is_prd = ui == p_utt and ti == p_idx
            if is_prd:
                predicate_index = len(nodes)
            lookup[(ui, ti)] = len(nodes)
            nodes.append(Node(WORD, tok, ui, u.speaker, len(nodes), is_prd, ti, pron.get((ui, ti))))

    spans = [(s.role, lookup[(s.utt, s.start)], lookup[(s.utt, s.end)]) for s in dialogue.roles]
    labels = tags_from_spans(spans, len(nodes))
    return NodeSequence(dialogue.dialogue_id, tuple(nodes), tuple(labels), predicate_index, len(dialogue.utterances), lookup)

