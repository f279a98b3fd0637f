from __future__ import annotations

import math

import numpy as np
import pytest

from polar.core import Value, add, matmul, no_grad
from polar.dialogue import SPEAKER, Dialogue, RoleSpan, Utterance, linearize
from polar.errors import ConfigError, DomainError, ShapeError
from polar.models.encoder import PSP, TASK, UNK, DialogueEncoder, EncoderConfig, Vocabulary
from tests.conftest import make_dialogue


def encoder_for(vocab: Vocabulary, **overrides) -> DialogueEncoder:
    base = dict(vocab_size=len(vocab), d_word=6, d_speaker=3, d_pos=4, d_prd=2, layers=1, heads=2, hidden=8, ff=12, dropout=0.0, max_len=32)
    base.update(overrides)
    return DialogueEncoder(EncoderConfig(**base), np.random.default_rng(0))


@pytest.fixture
def vocab() -> Vocabulary:
    return Vocabulary.build([make_dialogue()])


class TestLinearize:
    def test_node_count(self, dialogue):
        assert linearize(dialogue).K == 2 + 7

    def test_speaker_node_leads_each_utterance(self, dialogue):
        seq = linearize(dialogue)
        assert [n.kind for n in seq.nodes].count(SPEAKER) == 2
        assert seq.nodes[0].kind == SPEAKER and seq.nodes[4].kind == SPEAKER
        assert seq.nodes[0].surface == "<spk0>"

    def test_single_predicate_node(self, dialogue):
        seq = linearize(dialogue)
        flagged = [i for i, n in enumerate(seq.nodes) if n.is_predicate]
        assert flagged == [seq.predicate_index] == [6]
        assert seq.nodes[6].surface == "went"

    def test_span_projection(self):
        d = Dialogue(
            "p",
            (Utterance(0, ("a", "b", "c")), Utterance(1, ("d", "e"))),
            (1, 1),
            roles=(RoleSpan(0, 1, 2, "A0"),),
        )
        seq = linearize(d)
        assert list(seq.labels) == ["O", "O", "B-A0", "I-A0", "O", "O", "O"]

    def test_back_projection(self, dialogue):
        seq = linearize(dialogue)
        assert seq.to_role_spans(seq.node_spans()) == sorted(dialogue.roles)

    def test_spans_over_speaker_nodes_are_dropped(self, dialogue):
        seq = linearize(dialogue)
        assert seq.to_role_spans([("A0", 3, 5)]) == []

    def test_pronoun_targets(self, dialogue):
        positions, referents = linearize(dialogue).pronoun_targets()
        assert positions == [1, 5]
        assert referents == [0, 0]


class TestVocabulary:
    def test_speaker_tokens_and_unk(self, vocab):
        assert UNK in vocab.index and "<spk0>" in vocab.index and "<spk1>" in vocab.index
        assert vocab.lookup("never-seen") == vocab.unk

    def test_min_freq(self):
        v = Vocabulary.build([make_dialogue()], min_freq=2)
        assert "paris" not in v.index

    def test_save_load(self, vocab, tmp_path):
        vocab.save(tmp_path / "vocab.txt")
        assert Vocabulary.load(tmp_path / "vocab.txt").tokens == vocab.tokens


class TestConfig:
    def test_heads_must_divide_hidden(self):
        with pytest.raises(ConfigError):
            EncoderConfig(vocab_size=10, hidden=10, heads=4)

    def test_needs_two_speakers(self):
        with pytest.raises(ConfigError):
            EncoderConfig(vocab_size=10, n_speakers=1)


class TestEmbedding:
    def test_shape(self, vocab, dialogue):
        enc = encoder_for(vocab)
        x = enc.embed_inputs(linearize(dialogue), vocab, TASK)
        assert x.shape == (9, enc.cfg.d_in) == (9, 4 + 3 + 6 + 2)

    def test_predicate_channel_is_the_only_difference(self, vocab):
        enc = encoder_for(vocab)
        d = Dialogue("same", (Utterance(0, ("like", "like")),), (0, 1))
        seq = linearize(d)
        enc.pos_emb.data[:] = 0.0
        x = enc.embed_inputs(seq, vocab, TASK).data
        d_prd = enc.cfg.d_prd
        np.testing.assert_array_equal(x[1, :-d_prd], x[2, :-d_prd])
        assert not np.array_equal(x[1, -d_prd:], x[2, -d_prd:])

    def test_psp_mode_hides_predicate(self, vocab, dialogue):
        enc = encoder_for(vocab)
        x = enc.embed_inputs(linearize(dialogue), vocab, PSP).data
        prd = x[:, -enc.cfg.d_prd :]
        assert np.all(prd == prd[0])

    def test_sequence_longer_than_position_table(self, vocab, dialogue):
        with pytest.raises(ShapeError):
            encoder_for(vocab, max_len=5).embed_inputs(linearize(dialogue), vocab)

    def test_speaker_outside_table(self, vocab):
        d = Dialogue("s", (Utterance(3, ("like",)),), (0, 0))
        with pytest.raises(DomainError):
            encoder_for(vocab).embed_inputs(linearize(d), vocab)

    def test_bert_style_pairing_uses_two_segments(self, vocab, dialogue):
        enc = encoder_for(vocab, bert_style_pairing=True)
        seq = linearize(dialogue)
        assert enc._speaker_ids(seq) == [0, 0, 0, 0, 1, 1, 1, 1, 1]

    def test_speaker_label_marks_pronouns(self, vocab, dialogue):
        enc = encoder_for(vocab, spk_label=True)
        ids = enc._speaker_ids(linearize(dialogue))
        # "you" at node 5 is uttered by speaker 1 and refers to speaker 0
        assert ids[5] == 0
        assert ids[6] == 1


class TestContextualize:
    def test_shape(self, vocab, dialogue):
        enc = encoder_for(vocab)
        with no_grad():
            h = enc.encode(linearize(dialogue), vocab)
        assert h.shape == (9, 8)

    def test_order_matters(self, vocab):
        enc = encoder_for(vocab)
        a = Dialogue("a", (Utterance(0, ("like", "paris", "went")),), (0, 2))
        b = Dialogue("b", (Utterance(0, ("paris", "like", "went")),), (0, 2))
        with no_grad():
            ha = enc.encode(linearize(a), vocab).data
            hb = enc.encode(linearize(b), vocab).data
        assert not np.allclose(ha[1], hb[2])

    def test_zero_layers_is_linear_projection(self, vocab, dialogue):
        enc = encoder_for(vocab, layers=0)
        seq = linearize(dialogue)
        with no_grad():
            x = enc.embed_inputs(seq, vocab)
            expected = add(matmul(x, enc.in_proj.weight), enc.in_proj.bias).data
            np.testing.assert_allclose(enc.contextualize(x).data, expected)


class TestPsp:
    def test_uniform_logits(self, vocab, dialogue):
        enc = encoder_for(vocab)
        enc.psp_head.weight.data[:] = 0.0
        enc.psp_head.bias.data[:] = 0.0
        seq = linearize(dialogue)
        h = enc.encode(seq, vocab, PSP)
        loss = enc.psp_loss(h, *seq.pronoun_targets())
        assert loss.item() == pytest.approx(math.log(2), abs=1e-12)

    def test_confident_correct_logits(self, vocab, dialogue):
        enc = encoder_for(vocab)
        enc.psp_head.weight.data[:] = 0.0
        enc.psp_head.bias.data[:] = [40.0, -40.0]
        seq = linearize(dialogue)
        loss = enc.psp_loss(enc.encode(seq, vocab, PSP), *seq.pronoun_targets())
        assert loss.item() < 1e-12

    def test_no_positions(self, vocab):
        enc = encoder_for(vocab)
        with pytest.raises(DomainError):
            enc.psp_loss(Value(np.zeros((3, 8))), [], [])

    def test_parameter_groups(self, vocab):
        enc = encoder_for(vocab)
        task = {id(p) for p in enc.task_parameters()}
        psp = {id(p) for p in enc.psp_parameters()}
        assert id(enc.prd_emb) in task and id(enc.prd_emb) not in psp
        assert id(enc.absent_prd) in psp and id(enc.absent_prd) not in task
        assert id(enc.psp_head.weight) not in task
