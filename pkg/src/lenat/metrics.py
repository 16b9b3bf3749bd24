"""Corpus BLEU (clipped n-gram precisions aggregated before the geometric
mean, brevity penalty min(1, e^(1-r/c))) and corpus length ratio.

Scores are token-level over the ids/tokens given; corpus BLEU is unsmoothed
(any zero precision zeroes the score).  An exponential-smoothing variant is
available for per-sentence diagnostics.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, asdict

MAX_ORDER = 4


@dataclass(frozen=True)
class BleuReport:
    bleu: float
    precisions: tuple[float, float, float, float]
    bp: float
    hyp_len: int
    ref_len: int

    def to_json(self) -> str:
        d = asdict(self)
        d["p1"], d["p2"], d["p3"], d["p4"] = d.pop("precisions")
        return json.dumps(d, sort_keys=True)


@dataclass(frozen=True)
class LengthRatioReport:
    lr: float
    hyp_tokens: int
    ref_tokens: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hyps, refs, smooth: bool = False) -> BleuReport:
    """BLEU over a corpus of tokenized hypothesis/reference pairs.

    ``smooth`` applies exponential smoothing (halving the notional count for
    each zero precision) for sentence-level diagnostics; corpus scores are
    reported unsmoothed by default.
    """
    if len(hyps) != len(refs):
        raise ValueError(f"hyp/ref count mismatch: {len(hyps)} vs {len(refs)}")
    matched = [0] * MAX_ORDER
    total = [0] * MAX_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, MAX_ORDER + 1):
            hc = _ngram_counts(hyp, n)
            if not hc:
                continue
            rc = _ngram_counts(ref, n)
            total[n - 1] += sum(hc.values())
            matched[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())

    precisions = []
    smooth_inv = 1.0
    for n in range(MAX_ORDER):
        if total[n] == 0:
            precisions.append(0.0)
        elif matched[n] == 0:
            if smooth:
                smooth_inv *= 2.0
                precisions.append(1.0 / (smooth_inv * total[n]))
            else:
                precisions.append(0.0)
        else:
            precisions.append(matched[n] / total[n])

    # smoothed diagnostics use the effective order (orders with candidates)
    orders = [n for n in range(MAX_ORDER) if not (smooth and total[n] == 0)] or [0]
    if hyp_len == 0 or any(precisions[n] == 0.0 for n in orders):
        bleu = 0.0
        bp = 0.0 if hyp_len == 0 else _brevity_penalty(hyp_len, ref_len)
    else:
        bp = _brevity_penalty(hyp_len, ref_len)
        log_avg = sum(math.log(precisions[n]) for n in orders) / len(orders)
        bleu = 100.0 * bp * math.exp(log_avg)
    return BleuReport(
        bleu=bleu,
        precisions=tuple(precisions),
        bp=bp,
        hyp_len=hyp_len,
        ref_len=ref_len,
    )


def _brevity_penalty(c: int, r: int) -> float:
    if c >= r:
        return 1.0
    return math.exp(1.0 - r / c)


def length_ratio(hyps, refs) -> LengthRatioReport:
    """Total hypothesis tokens over total reference tokens."""
    if len(hyps) != len(refs):
        raise ValueError(f"hyp/ref count mismatch: {len(hyps)} vs {len(refs)}")
    hyp_tokens = sum(len(list(h)) for h in hyps)
    ref_tokens = sum(len(list(r)) for r in refs)
    if ref_tokens == 0:
        raise ValueError("reference corpus has no tokens")
    return LengthRatioReport(
        lr=hyp_tokens / ref_tokens, hyp_tokens=hyp_tokens, ref_tokens=ref_tokens
    )
