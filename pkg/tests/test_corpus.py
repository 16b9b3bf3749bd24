"""Vocabulary, tokenization, file IO, and synthetic task generation."""

import numpy as np
import pytest

from lenat.corpus import (
    BOS,
    EOS,
    PAD,
    PLH,
    UNK,
    ParallelCorpus,
    TokenSequence,
    Vocab,
    build_vocab,
    gen_synthetic,
    load_parallel,
    save_parallel,
)
from lenat.lengths import fit_ratio


class TestVocab:
    def test_reserved_ids(self):
        v = Vocab(["hello"])
        assert (PAD, BOS, EOS, UNK, PLH) == (0, 1, 2, 3, 4)
        assert v.itos[:5] == ["<pad>", "<bos>", "<eos>", "<unk>", "<plh>"]
        assert v.stoi["hello"] == 5

    def test_unknown_maps_to_unk(self):
        v = Vocab(["a"])
        assert v.encode("a zzz") == [5, UNK]

    def test_save_load_round_trip(self, tmp_path):
        v = Vocab(["b", "a", "c"])
        p = tmp_path / "vocab.txt"
        v.save(p)
        w = Vocab.load(p)
        assert w.itos == v.itos

    def test_load_rejects_missing_reserved(self, tmp_path):
        p = tmp_path / "vocab.txt"
        p.write_text("a\nb\n")
        with pytest.raises(ValueError):
            Vocab.load(p)


class TestBuildVocab:
    def test_frequency_ranking(self, tmp_path):
        f = tmp_path / "text.txt"
        f.write_text("a a b\n")
        v = build_vocab([f], max_size=10)
        assert v.stoi["a"] < v.stoi["b"]

    def test_min_freq_drops_singletons(self, tmp_path):
        f = tmp_path / "text.txt"
        f.write_text("a a b\n")
        v = build_vocab([f], max_size=10, min_freq=2)
        assert "b" not in v.stoi
        assert "a" in v.stoi

    def test_tie_break_lexicographic(self, tmp_path):
        f = tmp_path / "text.txt"
        f.write_text("zz aa zz aa\n")
        v = build_vocab([f], max_size=10)
        assert v.stoi["aa"] < v.stoi["zz"]

    def test_deterministic(self, tmp_path):
        f = tmp_path / "text.txt"
        f.write_text("c b a c b c\n")
        a = build_vocab([f], max_size=8)
        b = build_vocab([f], max_size=8)
        assert a.itos == b.itos

    def test_max_size_guard(self, tmp_path):
        f = tmp_path / "text.txt"
        f.write_text("a\n")
        with pytest.raises(ValueError):
            build_vocab([f], max_size=5)


class TestTokenSequence:
    def test_rejects_interior_pad(self):
        with pytest.raises(ValueError):
            TokenSequence((5, PAD, 6))

    def test_from_text(self):
        v = Vocab(["x", "y"])
        seq = TokenSequence.from_text("x y x", v)
        assert seq.ids == (5, 6, 5)
        assert seq.raw == "x y x"


class TestParallelIO:
    def test_load_three_lines(self, tmp_path):
        (tmp_path / "s.txt").write_text("a\nb b\nc\n")
        (tmp_path / "t.txt").write_text("x\ny\nz z\n")
        v = Vocab(["a", "b", "c", "x", "y", "z"])
        c = load_parallel(tmp_path / "s.txt", tmp_path / "t.txt", v)
        assert len(c) == 3

    def test_line_count_mismatch(self, tmp_path):
        (tmp_path / "s.txt").write_text("a\nb\n")
        (tmp_path / "t.txt").write_text("x\n")
        with pytest.raises(ValueError, match="mismatch"):
            load_parallel(tmp_path / "s.txt", tmp_path / "t.txt", Vocab(["a"]))

    def test_empty_line_reported_with_number(self, tmp_path):
        (tmp_path / "s.txt").write_text("a\n\nc\n")
        (tmp_path / "t.txt").write_text("x\ny\nz\n")
        with pytest.raises(ValueError, match="line at 2"):
            load_parallel(tmp_path / "s.txt", tmp_path / "t.txt", Vocab(["a", "c"]))

    def test_write_load_identity_on_ids(self, tmp_path):
        corpus, vocab = gen_synthetic("copy", 20, 8, 15, seed=3)
        save_parallel(corpus, tmp_path / "s.txt", tmp_path / "t.txt", vocab)
        again = load_parallel(tmp_path / "s.txt", tmp_path / "t.txt", vocab)
        assert [(s.ids, t.ids) for s, t in again.pairs] == [
            (s.ids, t.ids) for s, t in corpus.pairs
        ]

    def test_empty_sentence_rejected_in_corpus(self):
        with pytest.raises(ValueError):
            ParallelCorpus([(TokenSequence((5,)), TokenSequence(()))])


class TestSynthetic:
    def test_copy(self):
        corpus, _ = gen_synthetic("copy", 50, 10, 20, seed=0)
        assert all(s.ids == t.ids for s, t in corpus.pairs)

    def test_reverse(self):
        corpus, _ = gen_synthetic("reverse", 50, 10, 20, seed=0)
        assert all(t.ids == s.ids[::-1] for s, t in corpus.pairs)

    def test_expand_two(self):
        corpus, _ = gen_synthetic("expand(2)", 50, 10, 20, seed=0)
        for s, t in corpus.pairs:
            assert len(t) == 2 * len(s)
            assert t.ids == tuple(x for tok in s.ids for x in (tok, tok))

    def test_expand_ratio_is_exact(self):
        corpus, _ = gen_synthetic("expand(3)", 100, 9, 18, seed=5)
        assert fit_ratio(corpus) == pytest.approx(3.0)

    def test_same_seed_identical(self):
        a, _ = gen_synthetic("copy", 30, 10, 20, seed=9)
        b, _ = gen_synthetic("copy", 30, 10, 20, seed=9)
        assert [(s.ids, t.ids) for s, t in a.pairs] == [(s.ids, t.ids) for s, t in b.pairs]

    def test_unknown_task(self):
        with pytest.raises(ValueError, match="task"):
            gen_synthetic("shuffle", 10, 5, 10, seed=0)

    def test_ids_within_vocab(self):
        corpus, vocab = gen_synthetic("copy", 40, 12, 20, seed=2)
        top = len(vocab)
        assert all(max(s.ids) < top and min(s.ids) >= 5 for s, _ in corpus.pairs)
