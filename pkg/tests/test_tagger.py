from __future__ import annotations

import math
from functools import lru_cache
from itertools import product

import numpy as np
import pytest

from polar.core import AdamState, Value, adam_step, backward, no_grad
from polar.errors import DomainError, ShapeError
from polar.models.tagger import (
    OUTSIDE,
    Classifier,
    Tagset,
    TransitionMask,
    sequence_loss,
    spans_from_tags,
    tags_from_spans,
    viterbi_decode,
)
from tests.gradcheck import max_rel_error

TAGSET = Tagset.from_roles(("A0", "A1", "AM-TMP"))
MASK = TransitionMask.bio(TAGSET)


@lru_cache(maxsize=None)
def all_sequences(k: int, n: int) -> np.ndarray:
    return np.array(list(product(range(n), repeat=k)), dtype=np.int64)


def brute_force(em: np.ndarray, mask: TransitionMask, allowed: np.ndarray = None) -> list:
    k, n = em.shape
    seqs = all_sequences(k, n)
    valid = mask.start[seqs[:, 0]]
    if k > 1:
        valid &= mask.allowed[seqs[:, :-1], seqs[:, 1:]].all(axis=1)
    if allowed is not None:
        valid &= allowed[np.arange(k), seqs].all(axis=1)
    scores = np.where(valid, em[np.arange(k), seqs].sum(axis=1), -np.inf)
    return [int(i) for i in seqs[int(np.argmax(scores))]]


def random_spans(rng: np.random.Generator, length: int, roles) -> list:
    spans, i = [], 0
    while i < length:
        if rng.random() < 0.35:
            end = min(length - 1, i + int(rng.integers(0, 3)))
            spans.append((str(rng.choice(roles)), i, end))
            i = end + 1
        else:
            i += 1
    return spans


class TestTagset:
    def test_labels(self):
        assert TAGSET.labels == ("O", "B-A0", "I-A0", "B-A1", "I-A1", "B-AM-TMP", "I-AM-TMP")
        assert len(TAGSET) == 7

    def test_roundtrip_encoding(self):
        labels = ["O", "B-A1", "I-A1"]
        assert TAGSET.decode(TAGSET.encode(labels)) == labels

    def test_unknown_label(self):
        with pytest.raises(DomainError):
            TAGSET.encode(["B-A9"])

    def test_duplicate_roles(self):
        with pytest.raises(DomainError):
            Tagset(("A0", "A0"))


class TestClassifier:
    def test_rows_are_distributions(self):
        clf = Classifier(np.random.default_rng(0), 5, len(TAGSET))
        out = clf(Value(np.random.default_rng(1).normal(size=(4, 5))))
        assert out.shape == (4, 7)
        np.testing.assert_allclose(np.exp(out.data).sum(axis=1), 1.0, atol=1e-9)

    def test_zero_weights_are_uniform(self):
        clf = Classifier(np.random.default_rng(0), 5, len(TAGSET))
        clf.proj.weight.data[:] = 0.0
        out = clf(Value(np.ones((3, 5))))
        np.testing.assert_allclose(out.data, -math.log(7))


class TestSequenceLoss:
    def test_perfect_predictions(self):
        lp = np.full((3, 7), -1e9)
        lp[[0, 1, 2], [0, 1, 2]] = 0.0
        assert sequence_loss(Value(lp), [0, 1, 2]).item() == pytest.approx(0.0)

    def test_uniform_predictions(self):
        lp = np.full((4, 7), -math.log(7))
        assert sequence_loss(Value(lp), [0, 3, 4, 0]).item() == pytest.approx(1.9459, abs=1e-4)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            sequence_loss(Value(np.zeros((3, 7))), [0, 0])

    def test_one_step_lowers_loss(self):
        rng = np.random.default_rng(2)
        clf = Classifier(rng, 4, 7)
        feats = Value(rng.normal(size=(6, 4)))
        gold = rng.integers(0, 7, size=6)
        before = sequence_loss(clf(feats), gold)
        backward(before)
        adam_step(clf.parameters(), AdamState(lr=1e-2, weight_decay=0.0))
        with no_grad():
            after = sequence_loss(clf(feats), gold)
        assert after.item() < before.item()

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        clf = Classifier(rng, 4, 7)
        feats = Value.param(rng.normal(size=(5, 4)))
        gold = rng.integers(0, 7, size=5)
        def loss():
            return sequence_loss(clf(feats), gold)

        assert max_rel_error(loss, [feats, clf.proj.weight, clf.proj.bias]) < 1e-4


class TestViterbi:
    def test_single_position_never_inside(self):
        em = np.array([[0.0, -1.0, 50.0, -1.0, 50.0, -2.0, 50.0]])
        assert TAGSET.labels[viterbi_decode(em, MASK)[0]] in (OUTSIDE, "B-A0", "B-A1", "B-AM-TMP")

    def test_inside_heavy_emissions(self):
        em = np.full((2, 7), -10.0)
        em[:, TAGSET.index["I-A0"]] = 10.0
        path = viterbi_decode(em, MASK)
        assert MASK.is_valid(path)
        assert path == brute_force(em, MASK)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            em = rng.normal(size=(k, 7))
            assert viterbi_decode(em, MASK) == brute_force(em, MASK)

    def test_matches_brute_force_with_position_constraints(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            k = int(rng.integers(1, 6))
            em = rng.normal(size=(k, 7))
            allowed = np.ones((k, 7), dtype=bool)
            blocked = rng.random(k) < 0.4
            allowed[blocked] = False
            allowed[blocked, 0] = True
            assert viterbi_decode(em, MASK, allowed) == brute_force(em, MASK, allowed)

    def test_long_sequences_are_valid(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            k = int(rng.integers(1, 41))
            path = viterbi_decode(rng.normal(scale=3.0, size=(k, 7)), MASK)
            assert len(path) == k and MASK.is_valid(path)

    def test_flat_emissions_pick_lowest_labels(self):
        assert viterbi_decode(np.zeros((4, 7)), MASK) == [0, 0, 0, 0]

    def test_tied_final_label_resolves_low(self):
        em = np.full((2, 7), -5.0)
        em[1, TAGSET.index["B-A1"]] = em[1, TAGSET.index["B-A0"]] = 3.0
        assert viterbi_decode(em, MASK)[1] == TAGSET.index["B-A0"]

    def test_empty(self):
        assert viterbi_decode(np.zeros((0, 7)), MASK) == []

    def test_label_count_mismatch(self):
        with pytest.raises(ShapeError):
            viterbi_decode(np.zeros((3, 5)), MASK)


class TestSpans:
    def test_simple(self):
        assert spans_from_tags(["B-A0", "I-A0", "O"]) == [("A0", 0, 1)]

    def test_all_outside(self):
        assert spans_from_tags(["O"] * 5) == []

    def test_stray_inside_opens_span(self):
        assert spans_from_tags(["O", "I-A1", "I-A1"]) == [("A1", 1, 2)]

    def test_adjacent_spans(self):
        assert spans_from_tags(["B-A0", "B-A0", "I-A1"]) == [("A0", 0, 0), ("A0", 1, 1), ("A1", 2, 2)]

    def test_roundtrip(self):
        rng = np.random.default_rng(6)
        for _ in range(500):
            length = int(rng.integers(1, 15))
            spans = random_spans(rng, length, TAGSET.roles)
            assert spans_from_tags(tags_from_spans(spans, length)) == spans

    def test_overlap_rejected(self):
        with pytest.raises(DomainError):
            tags_from_spans([("A0", 0, 2), ("A1", 1, 1)], 4)
