"""Seeded synthetic dialogue corpus.

Every predicate owns a small pool of filler words per role, so role fillers
are lexically tied to their predicate and the task is learnable. Fillers of
other predicates appear as distractors. Arguments are planted in the current
utterance (intra) or in an earlier one (cross) at distance 1, 2 or 3+.
First/second person pronouns are inserted with their referent speaker.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from polar.data.corpus import Corpus
from polar.dialogue import Dialogue, PronounLabel, RoleSpan, Utterance
from polar.errors import ConfigError
from polar.log import get_logger

log = get_logger(__name__)

FIRST_PERSON = "i"
SECOND_PERSON = "you"
DEFAULT_ROLES = ("A0", "A1", "AM-LOC", "AM-TMP")
SPLIT_NAMES = ("train", "dev", "test")


@dataclass(frozen=True)
class GeneratorSpec:
    n_dialogues: int = 2000
    min_utterances: int = 2
    max_utterances: int = 6
    vocab_size: int = 200
    roles: Tuple[str, ...] = DEFAULT_ROLES
    n_predicates: int = 6
    fillers_per_role: int = 3
    min_args: int = 1
    max_args: int = 3
    cross_fraction: float = 0.4
    # weights for arguments 1, 2 and 3+ utterances away from the predicate
    distance_weights: Tuple[float, float, float] = (0.6, 0.3, 0.1)
    pronoun_rate: float = 0.3
    distractor_rate: float = 0.15
    min_words: int = 3
    max_words: int = 8
    max_span: int = 2
    seed: int = 7

    def __post_init__(self) -> None:
        if self.n_dialogues < 1:
            raise ConfigError(f"n_dialogues must be >= 1, got {self.n_dialogues}")
        if not 1 <= self.min_utterances <= self.max_utterances:
            raise ConfigError(f"utterance range [{self.min_utterances}, {self.max_utterances}] is empty or below 1")
        if not self.roles or len(set(self.roles)) != len(self.roles):
            raise ConfigError(f"roles must be a non-empty list of distinct labels, got {self.roles}")
        if not 1 <= self.min_args <= self.max_args:
            raise ConfigError(f"argument range [{self.min_args}, {self.max_args}] is empty or below 1")
        if not 0.0 <= self.cross_fraction <= 1.0:
            raise ConfigError(f"cross_fraction must lie in [0, 1], got {self.cross_fraction}")
        if self.cross_fraction > 0 and self.max_utterances < 2:
            raise ConfigError("cross-utterance arguments need max_utterances >= 2")
        if len(self.distance_weights) != 3 or min(self.distance_weights) < 0 or sum(self.distance_weights) <= 0:
            raise ConfigError(f"distance_weights must be three non-negative weights, got {self.distance_weights}")
        if self.distance_weights[2] > 0 and self.max_utterances < 4 and self.cross_fraction > 0:
            raise ConfigError("3+ distance arguments need max_utterances >= 4")
        if self.distance_weights[1] > 0 and self.max_utterances < 3 and self.cross_fraction > 0:
            raise ConfigError("distance-2 arguments need max_utterances >= 3")
        for key in ("pronoun_rate", "distractor_rate"):
            if not 0.0 <= getattr(self, key) <= 1.0:
                raise ConfigError(f"{key} must lie in [0, 1], got {getattr(self, key)}")
        if not 1 <= self.max_span:
            raise ConfigError(f"max_span must be >= 1, got {self.max_span}")
        if not 1 <= self.min_words <= self.max_words:
            raise ConfigError(f"word range [{self.min_words}, {self.max_words}] is empty or below 1")
        # worst case: every argument lands in one utterance next to the predicate
        need = min(self.max_args, len(self.roles)) * self.max_span + 2
        if need > self.max_words:
            raise ConfigError(
                f"infeasible spec: {min(self.max_args, len(self.roles))} spans of up to {self.max_span} words "
                f"plus predicate and pronoun need {need} words, max_words is {self.max_words}"
            )
        content = self.n_predicates * (1 + len(self.roles) * self.fillers_per_role)
        if self.n_predicates < 1 or self.fillers_per_role < 1 or content >= self.vocab_size:
            raise ConfigError(
                f"infeasible spec: {content} predicate and filler words leave no noise words in a vocabulary of {self.vocab_size}"
            )

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "GeneratorSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown generator key(s): {', '.join(unknown)}")
        clean = dict(values)
        for key in ("roles", "distance_weights"):
            if key in clean:
                clean[key] = tuple(clean[key])
        return cls(**clean)


@dataclass
class Lexicon:
    predicates: List[str]
    fillers: Dict[Tuple[str, str], List[str]]
    noise: List[str]
    distractors: Dict[str, List[str]] = field(default_factory=dict)


def _seed_for(*parts: str) -> int:
    s = "|".join(parts)
    # FNV-1a, stable across runs and interpreters
    h = 2166136261
    for ch in s:
        h ^= ord(ch)
        h = (h * 16777619) % (2**32)
    return int(h)


def build_lexicon(spec: GeneratorSpec) -> Lexicon:
    words = [f"w{i:03d}" for i in range(spec.vocab_size)]
    random.Random(_seed_for(str(spec.seed), "lexicon")).shuffle(words)
    it = iter(words)
    predicates = [next(it) for _ in range(spec.n_predicates)]
    fillers = {(p, r): [next(it) for _ in range(spec.fillers_per_role)] for p in predicates for r in spec.roles}
    noise = list(it)
    distractors = {p: [w for (q, _), pool in fillers.items() if q != p for w in pool] for p in predicates}
    return Lexicon(predicates, fillers, noise, distractors)


class _CrossBalancer:
    """Error-diffusion decision that tracks the requested cross fraction."""

    def __init__(self, target: float) -> None:
        self.target = target
        self.debt = 0.0

    def decide(self, rng: random.Random) -> bool:
        self.debt += self.target
        threshold = 0.5 + rng.uniform(-0.25, 0.25)
        if self.debt >= threshold:
            self.debt -= 1.0
            return True
        return False


def _pick_distance(spec: GeneratorSpec, rng: random.Random) -> int:
    bucket = rng.choices((1, 2, 3), weights=spec.distance_weights)[0]
    if bucket < 3:
        return bucket
    return rng.randint(3, spec.max_utterances - 1)


def _utterance(
    spec: GeneratorSpec,
    lex: Lexicon,
    rng: random.Random,
    pieces: List[Tuple[str, List[str]]],
    predicate: str,
) -> Tuple[List[str], Dict[int, Tuple[str, int, int]]]:
    """Lay out planted pieces among noise words.

    `pieces` are (tag, words); returns the tokens and piece index → (tag, start, end).
    """

    fixed = sum(len(w) for _, w in pieces)
    length = max(rng.randint(spec.min_words, spec.max_words), fixed)
    slots: List[Optional[int]] = [i for i in range(len(pieces))] + [None] * (length - fixed)
    rng.shuffle(slots)

    tokens: List[str] = []
    placed: Dict[int, Tuple[str, int, int]] = {}
    for slot in slots:
        if slot is None:
            distract = lex.distractors[predicate] and rng.random() < spec.distractor_rate
            pool = lex.distractors[predicate] if distract else lex.noise
            tokens.append(rng.choice(pool))
            continue
        tag, words = pieces[slot]
        placed[slot] = (tag, len(tokens), len(tokens) + len(words) - 1)
        tokens.extend(words)
    return tokens, placed


def generate_dialogue(spec: GeneratorSpec, lex: Lexicon, index: int, balancer: _CrossBalancer) -> Dialogue:
    rng = random.Random(_seed_for(str(spec.seed), "dialogue", str(index)))
    predicate = rng.choice(lex.predicates)
    n_args = rng.randint(spec.min_args, min(spec.max_args, len(spec.roles)))
    roles = rng.sample(list(spec.roles), n_args)

    distances: Dict[str, int] = {}
    for role in roles:
        distances[role] = _pick_distance(spec, rng) if balancer.decide(rng) else 0
    far = max(distances.values(), default=0)
    n_utt = max(rng.randint(spec.min_utterances, spec.max_utterances), far + 1)
    last = n_utt - 1
    first_speaker = rng.randint(0, 1)
    speakers = [(first_speaker + i) % 2 for i in range(n_utt)]

    per_utt: Dict[int, List[Tuple[str, List[str]]]] = {u: [] for u in range(n_utt)}
    for role in roles:
        size = rng.randint(1, spec.max_span)
        words = [rng.choice(lex.fillers[(predicate, role)]) for _ in range(size)]
        per_utt[last - distances[role]].append((role, words))
    per_utt[last].append(("<prd>", [predicate]))
    pron_referents: Dict[int, int] = {}
    for u in range(n_utt):
        if rng.random() < spec.pronoun_rate:
            word = rng.choice((FIRST_PERSON, SECOND_PERSON))
            per_utt[u].append(("<pron>", [word]))
            pron_referents[u] = speakers[u] if word == FIRST_PERSON else 1 - speakers[u]

    utterances: List[Utterance] = []
    spans: List[RoleSpan] = []
    pronouns: List[PronounLabel] = []
    pred_pos = (last, 0)
    for u in range(n_utt):
        tokens, placed = _utterance(spec, lex, rng, per_utt[u], predicate)
        for tag, start, end in placed.values():
            if tag == "<prd>":
                pred_pos = (u, start)
            elif tag == "<pron>":
                pronouns.append(PronounLabel(u, start, pron_referents[u]))
            else:
                spans.append(RoleSpan(u, start, end, tag))
        utterances.append(Utterance(speakers[u], tuple(tokens)))

    return Dialogue(
        dialogue_id=f"syn-{spec.seed}-{index:05d}",
        utterances=tuple(utterances),
        predicate=pred_pos,
        roles=tuple(sorted(spans)),
        pronouns=tuple(sorted(pronouns, key=lambda p: (p.utt, p.idx))),
    )


def gen_synthetic(spec: GeneratorSpec, seed: Optional[int] = None) -> Corpus:
    """Deterministic corpus for `spec` (and `seed`, when given, overriding spec.seed)."""
    if seed is not None and seed != spec.seed:
        spec = replace(spec, seed=seed)
    lex = build_lexicon(spec)
    balancer = _CrossBalancer(spec.cross_fraction)
    dialogues = []
    for i in range(spec.n_dialogues):
        d = generate_dialogue(spec, lex, i, balancer)
        d.validate(spec.roles)
        dialogues.append(d)
    log.info("generated %d synthetic dialogues (seed %d)", len(dialogues), spec.seed)
    return Corpus(tuple(dialogues), tuple(spec.roles), (0, 1))


def cross_ratio(corpus: Corpus) -> float:
    total = cross = 0
    for d in corpus:
        for s in d.roles:
            total += 1
            cross += int(s.utt != d.predicate[0])
    return cross / total if total else 0.0


def split_corpus(corpus: Corpus, ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 7) -> Dict[str, Corpus]:
    """Shuffle deterministically and cut into train/dev/test."""
    if len(corpus) == 0:
        raise ConfigError("cannot split an empty corpus")
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 1, got {tuple(ratios)}")
    order = list(corpus.dialogues)
    random.Random(_seed_for(str(seed), "split")).shuffle(order)
    n = len(order)
    n_train = int(round(n * ratios[0]))
    n_dev = int(round(n * ratios[1]))
    parts = (order[:n_train], order[n_train : n_train + n_dev], order[n_train + n_dev :])
    return {name: corpus.subset(part) for name, part in zip(SPLIT_NAMES, parts)}
