"""Target-length constraints: reference lengths, a source-length proxy with
a fixed ratio, and a corpus-fitted ratio.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .corpus import ParallelCorpus, TokenSequence


class ConstraintKind(enum.Enum):
    REFERENCE = "reference"
    SOURCE_PROXY = "proxy"
    FITTED_RATIO = "fitted"


@dataclass(frozen=True)
class ConstraintMode:
    kind: ConstraintKind
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


def reference_length(ref: TokenSequence) -> int:
    """Content token count of the reference."""
    if len(ref) == 0:
        raise ValueError("empty reference has no length")
    return len(ref)


def source_proxy(src: TokenSequence, alpha: float) -> int:
    """max(1, round(alpha * |src|)), rounding half away from zero."""
    if len(src) == 0:
        raise ValueError("empty source has no length")
    x = alpha * len(src)
    return max(1, int(math.floor(x + 0.5)))


def fit_ratio(corpus: ParallelCorpus) -> float:
    """Corpus-level target/source length ratio."""
    src_total = sum(len(s) for s, _ in corpus.pairs)
    tgt_total = sum(len(t) for _, t in corpus.pairs)
    if src_total == 0:
        raise ValueError("cannot fit a ratio on zero-length sources")
    return tgt_total / src_total


def constraint_for(
    mode: ConstraintMode, src: TokenSequence, ref: TokenSequence | None
) -> int:
    """Resolve one sentence's length constraint under the given mode."""
    if mode.kind is ConstraintKind.REFERENCE:
        if ref is None:
            raise ValueError("reference mode needs a reference sentence")
        return reference_length(ref)
    return source_proxy(src, mode.alpha)
