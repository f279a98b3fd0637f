"""Desk-scale dialogue encoder: four-channel input embedding, a small
self-attention stack, and the pronoun-based speaker prediction (PSP) head."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from polar.core import (
    Linear,
    Module,
    Value,
    add,
    concat,
    dropout,
    init_matrix,
    layer_norm,
    log_softmax,
    matmul,
    mul,
    nll_loss,
    relu,
    slice_cols,
    softmax,
    take_rows,
    transpose,
)
from polar.dialogue import SPEAKER, Dialogue, NodeSequence, speaker_surface
from polar.errors import ConfigError, DomainError, ShapeError

UNK = "<unk>"

TASK = "task"
PSP = "psp"


class Vocabulary:
    """Token ↔ index map. Persisted as a sorted text file, one token per line."""

    def __init__(self, tokens: Iterable[str]) -> None:
        toks = sorted(set(tokens) | {UNK})
        self.tokens: List[str] = toks
        self.index: Dict[str, int] = {t: i for i, t in enumerate(toks)}
        self.unk = self.index[UNK]

    def __len__(self) -> int:
        return len(self.tokens)

    def lookup(self, token: str) -> int:
        return self.index.get(token, self.unk)

    @classmethod
    def build(cls, dialogues: Iterable[Dialogue], min_freq: int = 1, n_speakers: int = 2) -> "Vocabulary":
        counts: Counter = Counter()
        for d in dialogues:
            for u in d.utterances:
                counts.update(u.tokens)
        words = [t for t, c in counts.items() if c >= min_freq]
        return cls(words + [speaker_surface(s) for s in range(n_speakers)])

    def save(self, path: Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line for line in lines if line)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    n_speakers: int = 2
    d_word: int = 48
    d_speaker: int = 16
    d_pos: int = 16
    d_prd: int = 16
    layers: int = 2
    heads: int = 4
    hidden: int = 96
    ff: int = 192
    dropout: float = 0.5
    max_len: int = 256
    bert_style_pairing: bool = False
    spk_label: bool = False

    def __post_init__(self) -> None:
        if self.hidden % self.heads:
            raise ConfigError(f"encoder hidden size {self.hidden} is not divisible by {self.heads} heads")
        if self.n_speakers < 2:
            raise ConfigError(f"need at least 2 speakers, got {self.n_speakers}")
        if self.layers < 0:
            raise ConfigError(f"encoder layers must be >= 0, got {self.layers}")

    @property
    def d_in(self) -> int:
        return self.d_pos + self.d_speaker + self.d_word + self.d_prd


class AttentionBlock(Module):
    """Multi-head self-attention + feed-forward, post-norm residuals."""

    def __init__(self, rng: np.random.Generator, hidden: int, heads: int, ff: int) -> None:
        self.heads = heads
        self.q = Linear(rng, hidden, hidden)
        self.k = Linear(rng, hidden, hidden)
        self.v = Linear(rng, hidden, hidden)
        self.o = Linear(rng, hidden, hidden)
        self.ln1_gain = Value.param(np.ones(hidden))
        self.ln1_bias = Value.param(np.zeros(hidden))
        self.ff1 = Linear(rng, hidden, ff)
        self.ff2 = Linear(rng, ff, hidden)
        self.ln2_gain = Value.param(np.ones(hidden))
        self.ln2_bias = Value.param(np.zeros(hidden))

    def __call__(self, x: Value) -> Value:
        hidden = x.shape[1]
        dk = hidden // self.heads
        q, k, v = self.q(x), self.k(x), self.v(x)
        outs = []
        for h in range(self.heads):
            lo, hi = h * dk, (h + 1) * dk
            qh, kh, vh = slice_cols(q, lo, hi), slice_cols(k, lo, hi), slice_cols(v, lo, hi)
            w = softmax(mul(matmul(qh, transpose(kh)), 1.0 / math.sqrt(dk)))
            outs.append(matmul(w, vh))
        attn = self.o(concat(outs) if len(outs) > 1 else outs[0])
        x = layer_norm(add(x, attn), self.ln1_gain, self.ln1_bias)
        ff = self.ff2(relu(self.ff1(x)))
        return layer_norm(add(x, ff), self.ln2_gain, self.ln2_bias)


class DialogueEncoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator) -> None:
        self.cfg = cfg
        self.word_emb = init_matrix(rng, cfg.vocab_size, cfg.d_word)
        self.speaker_emb = init_matrix(rng, cfg.n_speakers, cfg.d_speaker)
        self.pos_emb = init_matrix(rng, cfg.max_len, cfg.d_pos)
        self.prd_emb = init_matrix(rng, 2, cfg.d_prd)
        self.absent_prd = init_matrix(rng, 1, cfg.d_prd)
        self.in_proj = Linear(rng, cfg.d_in, cfg.hidden)
        self.blocks = [AttentionBlock(rng, cfg.hidden, cfg.heads, cfg.ff) for _ in range(cfg.layers)]
        self.psp_head = Linear(rng, cfg.hidden, cfg.n_speakers)

    # -----------------
    # Parameter groups
    # -----------------

    def task_parameters(self) -> List[Value]:
        skip = {id(self.absent_prd)} | {id(p) for p in self.psp_head.parameters()}
        return [p for p in self.parameters() if id(p) not in skip]

    def psp_parameters(self) -> List[Value]:
        return [p for p in self.parameters() if p is not self.prd_emb]

    # -----------------
    # Forward
    # -----------------

    def _speaker_ids(self, seq: NodeSequence) -> List[int]:
        cfg = self.cfg
        ids = []
        for n in seq.nodes:
            if cfg.bert_style_pairing:
                # two segments only: current utterance vs. history
                sid = 1 if n.utt == seq.n_utterances - 1 else 0
            elif cfg.spk_label and n.kind != SPEAKER and n.referent is not None:
                sid = n.referent
            else:
                sid = n.speaker
            if not 0 <= sid < cfg.n_speakers:
                raise DomainError(f"speaker id {sid} outside the {cfg.n_speakers}-speaker table")
            ids.append(sid)
        return ids

    def embed_inputs(self, seq: NodeSequence, vocab: Vocabulary, mode: str = TASK) -> Value:
        """[position ; speaker ; word ; predicate] per node, K x d_in."""
        if seq.K > self.cfg.max_len:
            raise ShapeError(f"embed_inputs: sequence of {seq.K} nodes exceeds position table of {self.cfg.max_len}")
        if mode not in (TASK, PSP):
            raise DomainError(f"embed_inputs: unknown mode {mode!r}")
        x_pos = take_rows(self.pos_emb, [n.position for n in seq.nodes])
        x_spk = take_rows(self.speaker_emb, self._speaker_ids(seq))
        x_word = take_rows(self.word_emb, [vocab.lookup(n.surface) for n in seq.nodes])
        if mode == TASK:
            x_prd = take_rows(self.prd_emb, [int(n.is_predicate) for n in seq.nodes])
        else:
            x_prd = take_rows(self.absent_prd, [0] * seq.K)
        return concat([x_pos, x_spk, x_word, x_prd])

    def contextualize(self, x: Value, train: bool = False, rng: Optional[np.random.Generator] = None) -> Value:
        """K x d_in → K x hidden."""
        h = self.in_proj(dropout(x, self.cfg.dropout, rng, train))
        for block in self.blocks:
            h = block(h)
        return h

    def encode(
        self,
        seq: NodeSequence,
        vocab: Vocabulary,
        mode: str = TASK,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Value:
        return self.contextualize(self.embed_inputs(seq, vocab, mode), train, rng)

    def psp_loss(self, h: Value, positions: Sequence[int], referents: Sequence[int]) -> Value:
        """Mean cross-entropy of referent speaker ids at pronoun positions."""
        if not positions:
            raise DomainError("psp_loss: no labeled pronoun positions")
        logits = self.psp_head(take_rows(h, positions))
        return nll_loss(log_softmax(logits), referents)

    def psp_predict(self, h: Value, positions: Sequence[int]) -> List[int]:
        if not positions:
            return []
        logits = self.psp_head(take_rows(h, positions))
        return [int(i) for i in np.argmax(logits.data, axis=1)]
