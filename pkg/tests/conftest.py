from __future__ import annotations

import numpy as np
import pytest

from polar.data.corpus import Corpus
from polar.data.synthetic import GeneratorSpec, gen_synthetic
from polar.dialogue import Dialogue, PronounLabel, RoleSpan, Utterance
from polar.models.encoder import Vocabulary
from polar.models.network import PolarModel
from polar.models.tagger import Tagset
from polar.settings import RunConfig

ROLES = ("A0", "A1", "AM-LOC", "AM-TMP")

# small enough for a full forward/backward in milliseconds
TINY = dict(
    d_word=8,
    d_speaker=4,
    d_pos=4,
    d_prd=4,
    enc_layers=1,
    enc_heads=2,
    enc_hidden=8,
    enc_ff=16,
    max_len=96,
    score_dim=4,
    gcn_layers=2,
    gcn_hidden=10,
    dropout=0.0,
    epochs=1,
    psp_epochs=1,
    batch_size=4,
    progress=False,
    workers=1,
    stochastic_edges=False,
)


def make_dialogue(did: str = "d-0") -> Dialogue:
    """Two utterances; A0 and AM-TMP intra, AM-LOC one utterance back."""
    return Dialogue(
        dialogue_id=did,
        utterances=(
            Utterance(0, ("i", "like", "paris")),
            Utterance(1, ("you", "went", "there", "yesterday")),
        ),
        predicate=(1, 1),
        roles=(RoleSpan(0, 2, 2, "AM-LOC"), RoleSpan(1, 0, 0, "A0"), RoleSpan(1, 3, 3, "AM-TMP")),
        pronouns=(PronounLabel(0, 0, 0), PronounLabel(1, 0, 0)),
    )


@pytest.fixture
def dialogue() -> Dialogue:
    return make_dialogue()


@pytest.fixture
def pair_corpus() -> Corpus:
    second = Dialogue(
        dialogue_id="d-1",
        utterances=(
            Utterance(1, ("we", "met", "at", "noon")),
            Utterance(0, ("i", "saw", "you")),
        ),
        predicate=(1, 1),
        roles=(RoleSpan(0, 2, 3, "AM-TMP"), RoleSpan(1, 0, 0, "A0"), RoleSpan(1, 2, 2, "A1")),
        pronouns=(PronounLabel(1, 0, 0), PronounLabel(1, 2, 1)),
    )
    return Corpus((make_dialogue(), second), ROLES)


@pytest.fixture
def tiny_cfg() -> RunConfig:
    return RunConfig.defaults().replace(**TINY)


@pytest.fixture
def tiny_spec() -> GeneratorSpec:
    return GeneratorSpec(n_dialogues=40, vocab_size=60, n_predicates=2, fillers_per_role=2, max_utterances=4, seed=3)


@pytest.fixture
def tiny_corpus(tiny_spec) -> Corpus:
    return gen_synthetic(tiny_spec)


def build_model(cfg: RunConfig, corpus: Corpus) -> PolarModel:
    vocab = Vocabulary.build(corpus, n_speakers=cfg.n_speakers)
    return PolarModel(cfg, vocab, Tagset.from_roles(corpus.roles), np.random.default_rng(cfg.seed))


@pytest.fixture
def tiny_model(tiny_cfg, pair_corpus) -> PolarModel:
    return build_model(tiny_cfg, pair_corpus)
