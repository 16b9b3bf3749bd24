"""BLEU and length-ratio scoring against brute-force oracles."""

import json
import math

import numpy as np
import pytest

from helpers import bleu_oracle
from lenat.metrics import corpus_bleu, length_ratio


def toks(text):
    return text.split()


class TestBleuExamples:
    def test_perfect_match_is_100(self):
        refs = [toks("the cat sat on the mat"), toks("a b c d")]
        rep = corpus_bleu(refs, refs)
        assert rep.bleu == 100.0
        assert rep.bp == 1.0
        assert rep.precisions == (1.0, 1.0, 1.0, 1.0)

    def test_brevity_penalty_worked_example(self):
        rep = corpus_bleu([toks("a b c")], [toks("a b c d")])
        assert rep.bp == pytest.approx(math.exp(1.0 - 4.0 / 3.0), abs=1e-12)
        assert rep.bp == pytest.approx(math.exp(-1.0 / 3.0), abs=1e-12)

    def test_clipping(self):
        rep = corpus_bleu([toks("a a a a")], [toks("a b")])
        assert rep.precisions[0] == pytest.approx(0.25)

    def test_zero_precision_zeroes_bleu(self):
        rep = corpus_bleu([toks("x y z q")], [toks("a b c d")])
        assert rep.bleu == 0.0

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            corpus_bleu([toks("a")], [toks("a"), toks("b")])

    def test_bleu_in_range(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            hyps = [
                list(rng.integers(0, 4, size=rng.integers(1, 10))) for _ in range(4)
            ]
            refs = [
                list(rng.integers(0, 4, size=rng.integers(1, 10))) for _ in range(4)
            ]
            rep = corpus_bleu(hyps, refs)
            assert 0.0 <= rep.bleu <= 100.0

    def test_pair_order_invariance(self):
        rng = np.random.default_rng(1)
        hyps = [list(rng.integers(0, 5, size=6)) for _ in range(8)]
        refs = [list(rng.integers(0, 5, size=7)) for _ in range(8)]
        rep = corpus_bleu(hyps, refs)
        order = rng.permutation(8)
        rep2 = corpus_bleu([hyps[i] for i in order], [refs[i] for i in order])
        assert rep2.bleu == pytest.approx(rep.bleu, abs=1e-12)
        assert rep2.bp == pytest.approx(rep.bp, abs=1e-12)

    def test_matches_oracle_on_random_corpora(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            hyps = [
                list(rng.integers(0, 5, size=rng.integers(1, 12))) for _ in range(n)
            ]
            refs = [
                list(rng.integers(0, 5, size=rng.integers(1, 12))) for _ in range(n)
            ]
            rep = corpus_bleu(hyps, refs)
            want_bleu, want_bp = bleu_oracle(hyps, refs)
            assert rep.bleu == pytest.approx(want_bleu, abs=1e-9)
            assert rep.bp == pytest.approx(want_bp, abs=1e-9)

    def test_smoothed_variant_nonzero(self):
        rep = corpus_bleu([toks("a b")], [toks("a c")], smooth=True)
        assert 0.0 < rep.bleu < 100.0

    def test_json_record_fields(self):
        rep = corpus_bleu([toks("a b c d")], [toks("a b c d")])
        rec = json.loads(rep.to_json())
        assert set(rec) >= {"bleu", "p1", "p2", "p3", "p4", "bp", "hyp_len", "ref_len"}


class TestLengthRatio:
    def test_identity(self):
        refs = [toks("a b c"), toks("d e")]
        assert length_ratio(refs, refs).lr == 1.0

    def test_arithmetic(self):
        hyps = [list(range(3)), list(range(5))]
        refs = [list(range(4)), list(range(5))]
        rep = length_ratio(hyps, refs)
        assert rep.lr == pytest.approx(8 / 9)
        assert (rep.hyp_tokens, rep.ref_tokens) == (8, 9)

    def test_doubling_is_linear(self):
        hyps = [toks("a b"), toks("c")]
        refs = [toks("x y z"), toks("w w")]
        once = length_ratio(hyps, refs).lr
        doubled = length_ratio([h + h for h in hyps], refs).lr
        assert doubled == pytest.approx(2 * once)

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            length_ratio([[]], [[]])
