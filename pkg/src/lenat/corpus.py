"""Corpus handling: vocabulary with fixed special tokens, whitespace
tokenization, parallel-file IO, and synthetic copy/reverse/expand tasks.

Sequences carry content ids only; BOS/EOS framing is applied by the models.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from collections import Counter

import numpy as np

PAD, BOS, EOS, UNK, PLH = 0, 1, 2, 3, 4
RESERVED = ["<pad>", "<bos>", "<eos>", "<unk>", "<plh>"]
NUM_RESERVED = len(RESERVED)


class Vocab:
    """token <-> id table; ids 0..4 are PAD, BOS, EOS, UNK, PLH."""

    def __init__(self, tokens: list[str]):
        self.itos = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.itos)

    def encode(self, text: str) -> list[int]:
        return [self.stoi.get(tok, UNK) for tok in text.split()]

    def decode(self, ids) -> str:
        return " ".join(self.itos[i] for i in ids)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.itos:
                f.write(tok + "\n")

    @staticmethod
    def load(path) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            toks = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        if toks[:NUM_RESERVED] != RESERVED:
            raise ValueError(f"{path}: reserved tokens missing or reordered")
        return Vocab(toks[NUM_RESERVED:])


@dataclass(frozen=True)
class TokenSequence:
    """Content token ids (no BOS/EOS/PAD) with optional raw text."""

    ids: tuple[int, ...]
    raw: str | None = None

    def __post_init__(self):
        if any(i == PAD for i in self.ids):
            raise ValueError("PAD inside a token sequence")

    def __len__(self):
        return len(self.ids)

    @staticmethod
    def from_text(text: str, vocab: Vocab) -> "TokenSequence":
        return TokenSequence(tuple(vocab.encode(text)), raw=text)


@dataclass
class ParallelCorpus:
    pairs: list[tuple[TokenSequence, TokenSequence]]
    name: str = ""
    split: str = ""

    def __post_init__(self):
        for k, (src, tgt) in enumerate(self.pairs):
            if len(src) == 0 or len(tgt) == 0:
                raise ValueError(f"{self.name}: empty sentence in pair {k}")

    def __len__(self):
        return len(self.pairs)

    def sources(self) -> list[TokenSequence]:
        return [s for s, _ in self.pairs]

    def targets(self) -> list[TokenSequence]:
        return [t for _, t in self.pairs]


def load_parallel(src_path, tgt_path, vocab: Vocab, name: str = "", split: str = "") -> ParallelCorpus:
    """Read aligned one-sentence-per-line UTF-8 files; OOV tokens become UNK."""
    with open(src_path, encoding="utf-8") as f:
        src_lines = f.read().splitlines()
    with open(tgt_path, encoding="utf-8") as f:
        tgt_lines = f.read().splitlines()
    if len(src_lines) != len(tgt_lines):
        raise ValueError(
            f"line-count mismatch: {src_path} has {len(src_lines)}, "
            f"{tgt_path} has {len(tgt_lines)}"
        )
    pairs = []
    for k, (s, t) in enumerate(zip(src_lines, tgt_lines)):
        if not s.strip() or not t.strip():
            raise ValueError(f"empty line at {k + 1} in {src_path} / {tgt_path}")
        pairs.append((TokenSequence.from_text(s, vocab), TokenSequence.from_text(t, vocab)))
    return ParallelCorpus(pairs, name=name or str(src_path), split=split)


def save_parallel(corpus: ParallelCorpus, src_path, tgt_path, vocab: Vocab):
    with open(src_path, "w", encoding="utf-8") as fs, open(tgt_path, "w", encoding="utf-8") as ft:
        for src, tgt in corpus.pairs:
            fs.write(vocab.decode(src.ids) + "\n")
            ft.write(vocab.decode(tgt.ids) + "\n")


def build_vocab(corpus_files, max_size: int, min_freq: int = 1) -> Vocab:
    """Frequency-sorted vocabulary over whitespace tokens, ties lexicographic."""
    if max_size <= NUM_RESERVED:
        raise ValueError(f"max_size must exceed {NUM_RESERVED}, got {max_size}")
    counts: Counter[str] = Counter()
    for path in corpus_files:
        with open(path, encoding="utf-8") as f:
            for line in f:
                counts.update(line.split())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    tokens = [t for t, c in ranked if c >= min_freq][: max_size - NUM_RESERVED]
    return Vocab(tokens)


_EXPAND_RE = re.compile(r"^expand\((\d+)\)$")


def synthetic_vocab(vocab_size: int) -> Vocab:
    """Vocabulary of word types w0..wN for synthetic tasks."""
    if vocab_size <= NUM_RESERVED:
        raise ValueError(f"vocab_size must exceed {NUM_RESERVED}")
    return Vocab([f"w{i}" for i in range(vocab_size - NUM_RESERVED)])


def gen_synthetic(
    task: str, n: int, max_len: int, vocab_size: int, seed: int
) -> tuple[ParallelCorpus, Vocab]:
    """Build a synthetic parallel corpus.

    copy: tgt = src; reverse: tgt = reversed src; expand(k): every source
    token repeated k times, so |tgt| = k * |src| exactly.
    """
    if n < 1:
        raise ValueError("need n >= 1 sentences")
    vocab = synthetic_vocab(vocab_size)
    expand = _EXPAND_RE.match(task)
    if task not in ("copy", "reverse") and not expand:
        raise ValueError(f"unknown task {task!r}; expected copy, reverse or expand(k)")
    k = int(expand.group(1)) if expand else 1
    if expand and k < 1:
        raise ValueError("expand(k) needs k >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = NUM_RESERVED, vocab_size
    pairs = []
    for _ in range(n):
        length = int(rng.integers(1, max_len + 1))
        src = tuple(int(x) for x in rng.integers(lo, hi, size=length))
        if task == "copy":
            tgt = src
        elif task == "reverse":
            tgt = src[::-1]
        else:
            tgt = tuple(tok for tok in src for _ in range(k))
        pairs.append((TokenSequence(src), TokenSequence(tgt)))
    return ParallelCorpus(pairs, name=f"{task}-n{n}", split="train"), vocab
