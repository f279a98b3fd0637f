"""Full model: encoder → latent graph → GCN + fusion → BIO classifier."""

from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

from polar.core import Module, Value, dropout, no_grad
from polar.dialogue import Dialogue, NodeSequence, linearize
from polar.errors import DomainError
from polar.models.encoder import PSP, TASK, DialogueEncoder, EncoderConfig, Vocabulary
from polar.models.graph import GcnConfig, GraphEncoder
from polar.models.inducer import DETERMINISTIC, STOCHASTIC, LatentGraph, PolarInducer
from polar.models.tagger import (
    OUTSIDE,
    Classifier,
    Tagset,
    TransitionMask,
    sequence_loss,
    spans_from_tags,
    viterbi_decode,
)
from polar.settings import RunConfig


class PolarModel(Module):
    def __init__(self, cfg: RunConfig, vocab: Vocabulary, tagset: Tagset, rng: np.random.Generator) -> None:
        self.cfg = cfg
        self.vocab = vocab
        self.tagset = tagset
        self.transitions = TransitionMask.bio(tagset)
        enc_cfg = EncoderConfig(
            vocab_size=len(vocab),
            n_speakers=cfg.n_speakers,
            d_word=cfg.d_word,
            d_speaker=cfg.d_speaker,
            d_pos=cfg.d_pos,
            d_prd=cfg.d_prd,
            layers=cfg.enc_layers,
            heads=cfg.enc_heads,
            hidden=cfg.enc_hidden,
            ff=cfg.enc_ff,
            dropout=cfg.dropout,
            max_len=cfg.max_len,
            bert_style_pairing=cfg.bert_style_pairing,
            spk_label=cfg.spk_label,
        )
        self.encoder = DialogueEncoder(enc_cfg, rng)
        self.inducer = PolarInducer(
            rng,
            cfg.enc_hidden,
            d_score=cfg.score_dim,
            alpha_init=cfg.alpha_init,
            use_pgi=not cfg.no_pgi,
            use_prune=not cfg.no_prune,
            prune_axis=cfg.prune_axis,
            param_norm=cfg.param_norm,
            shared_row_noise=cfg.shared_row_noise,
        )
        self.graph = GraphEncoder(rng, cfg.enc_hidden, GcnConfig(cfg.gcn_layers, cfg.gcn_hidden), gated=not cfg.no_gate)
        self.classifier = Classifier(rng, cfg.gcn_hidden, len(tagset))

    # -----------------
    # Parameter groups
    # -----------------

    def task_parameters(self) -> List[Value]:
        return (
            self.encoder.task_parameters()
            + self.inducer.task_parameters()
            + self.graph.parameters()
            + self.classifier.parameters()
        )

    def psp_parameters(self) -> List[Value]:
        return self.encoder.psp_parameters()

    @property
    def alpha(self) -> Optional[float]:
        return self.inducer.alpha.value if self.inducer.use_prune else None

    # -----------------
    # Forward
    # -----------------

    def _edge_mode(self, train: bool) -> str:
        if train:
            return STOCHASTIC if self.cfg.stochastic_edges else DETERMINISTIC
        return DETERMINISTIC if self.cfg.deterministic_eval else STOCHASTIC

    def forward(
        self,
        seq: NodeSequence,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[Value, LatentGraph]:
        """Row log-probabilities over the tagset (K x |Y|) and the induced graph."""
        h = self.encoder.encode(seq, self.vocab, TASK, train, rng)
        graph = self.inducer(h, seq.predicate_index, self._edge_mode(train), rng)
        feats = self.graph(h, graph.e_pruned)
        feats = dropout(feats, self.cfg.dropout, rng, train)
        return self.classifier(feats), graph

    def task_loss(self, seq: NodeSequence, rng: Optional[np.random.Generator] = None) -> Value:
        log_probs, _ = self.forward(seq, train=True, rng=rng)
        return sequence_loss(log_probs, self.tagset.encode(seq.labels))

    def psp_loss(self, seq: NodeSequence, rng: Optional[np.random.Generator] = None) -> Value:
        positions, referents = seq.pronoun_targets()
        if not positions:
            raise DomainError(f"{seq.dialogue_id}: no labeled pronoun positions")
        h = self.encoder.encode(seq, self.vocab, PSP, train=True, rng=rng)
        return self.encoder.psp_loss(h, positions, referents)

    def psp_accuracy(self, seqs: List[NodeSequence]) -> float:
        hits = total = 0
        with no_grad():
            for seq in seqs:
                positions, referents = seq.pronoun_targets()
                if not positions:
                    continue
                h = self.encoder.encode(seq, self.vocab, PSP)
                pred = self.encoder.psp_predict(h, positions)
                hits += sum(int(p == r) for p, r in zip(pred, referents))
                total += len(referents)
        return hits / total if total else 0.0

    # -----------------
    # Inference
    # -----------------

    def label_constraints(self, seq: NodeSequence) -> np.ndarray:
        """Per-position allowed labels; speaker nodes may only be O."""
        allowed = np.ones((seq.K, len(self.tagset)), dtype=bool)
        spk = seq.speaker_mask()
        allowed[spk] = False
        allowed[spk, self.tagset.index[OUTSIDE]] = True
        return allowed

    def predict_labels(self, seq: NodeSequence, rng: Optional[np.random.Generator] = None) -> List[str]:
        with no_grad():
            log_probs, _ = self.forward(seq, train=False, rng=rng)
        ids = viterbi_decode(log_probs.data, self.transitions, self.label_constraints(seq))
        return self.tagset.decode(ids)

    def predict(self, dialogue: Dialogue, rng: Optional[np.random.Generator] = None) -> Dialogue:
        """Copy of `dialogue` with its roles replaced by the decoded spans."""
        seq = linearize(dialogue.with_roles(()))
        labels = self.predict_labels(seq, rng)
        return dialogue.with_roles(seq.to_role_spans(spans_from_tags(labels)))

    def inspect(self, dialogue: Dialogue, rng: Optional[np.random.Generator] = None) -> Tuple[NodeSequence, LatentGraph]:
        seq = linearize(dialogue)
        with no_grad():
            h = self.encoder.encode(seq, self.vocab, TASK)
            graph = self.inducer(h, seq.predicate_index, self._edge_mode(False), rng)
        return seq, graph
