"""Length-constraint providers."""

import pytest

from lenat.corpus import TokenSequence, ParallelCorpus, gen_synthetic
from lenat.lengths import (
    ConstraintKind,
    ConstraintMode,
    constraint_for,
    fit_ratio,
    reference_length,
    source_proxy,
)


def seq(*ids):
    return TokenSequence(tuple(ids))


class TestReferenceLength:
    def test_counts_content_tokens(self):
        assert reference_length(seq(5, 6, 7)) == 3

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            reference_length(TokenSequence(()))


class TestSourceProxy:
    def test_identity_ratio(self):
        assert source_proxy(seq(*range(5, 12)), 1.0) == 7

    def test_floor_guard(self):
        assert source_proxy(seq(5), 0.5) == 1

    def test_scaling(self):
        assert source_proxy(seq(*range(5, 15)), 1.2) == 12

    def test_round_half_away_from_zero(self):
        assert source_proxy(seq(5, 6, 7), 0.5) == 2  # 1.5 -> 2
        assert source_proxy(seq(5, 6, 7, 8, 9), 0.5) == 3  # 2.5 -> 3

    def test_monotone_in_source_length(self):
        alpha = 0.7
        lengths = [source_proxy(seq(*range(5, 5 + n)), alpha) for n in range(1, 30)]
        assert all(a <= b for a, b in zip(lengths, lengths[1:]))

    def test_alpha_positive(self):
        with pytest.raises(ValueError):
            ConstraintMode(ConstraintKind.SOURCE_PROXY, alpha=0.0)


class TestFitRatio:
    def test_copy_corpus(self):
        corpus, _ = gen_synthetic("copy", 40, 10, 20, seed=0)
        assert fit_ratio(corpus) == pytest.approx(1.0)

    def test_expand_corpus(self):
        corpus, _ = gen_synthetic("expand(2)", 40, 10, 20, seed=0)
        assert fit_ratio(corpus) == pytest.approx(2.0)

    def test_arithmetic(self):
        pairs = [
            (seq(5, 6), seq(7, 8, 9)),
            (seq(5, 6, 7, 8), seq(9, 10, 11, 12, 13)),
        ]
        assert fit_ratio(ParallelCorpus(pairs)) == pytest.approx(8 / 6)


class TestConstraintFor:
    def test_reference_mode(self):
        mode = ConstraintMode(ConstraintKind.REFERENCE)
        assert constraint_for(mode, seq(5), seq(6, 7, 8)) == 3

    def test_reference_mode_needs_ref(self):
        with pytest.raises(ValueError):
            constraint_for(ConstraintMode(ConstraintKind.REFERENCE), seq(5), None)

    def test_proxy_mode(self):
        mode = ConstraintMode(ConstraintKind.SOURCE_PROXY, alpha=2.0)
        assert constraint_for(mode, seq(5, 6, 7), None) == 6
