"""Independent oracles shared across test modules.

These deliberately avoid the library's own code paths: finite differences
for gradients, an LCS-based insert/delete distance, and a Counter-based
BLEU recomputation.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from lenat import autodiff as ad


def fd_max_rel_err(f, tensors, eps: float = 1e-5) -> float:
    """Max |analytic - central difference| normalized by the gradient scale.

    ``f()`` must rebuild the graph from ``tensors`` and return a scalar
    Tensor.  Gradient scale is the largest numeric-gradient magnitude
    (floored at 1e-8), so zero-gradient cases compare exactly.
    """
    for t in tensors:
        t.zero_grad()
    loss = f()
    ad.backward(loss)
    worst = 0.0
    for t in tensors:
        analytic = t.grad.copy()
        numeric = np.zeros_like(t.data)
        flat = t.data.ravel()
        nflat = numeric.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f().item()
            flat[i] = orig - eps
            down = f().item()
            flat[i] = orig
            nflat[i] = (up - down) / (2.0 * eps)
        scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-8)
        worst = max(worst, float(np.abs(analytic - numeric).max() / scale))
    return worst


def insdel_distance(a, b) -> int:
    """Insert/delete edit distance via LCS: n + m - 2*LCS(a, b)."""
    a, b = list(a), list(b)
    n, m = len(a), len(b)
    lcs = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                lcs[i][j] = lcs[i - 1][j - 1] + 1
            else:
                lcs[i][j] = max(lcs[i - 1][j], lcs[i][j - 1])
    return n + m - 2 * lcs[n][m]


def bleu_oracle(hyps, refs) -> tuple[float, float]:
    """Brute-force corpus BLEU and brevity penalty (unsmoothed, order 4)."""
    matched = [0] * 4
    total = [0] * 4
    c = sum(len(list(h)) for h in hyps)
    r = sum(len(list(x)) for x in refs)
    for hyp, ref in zip(hyps, refs):
        hyp, ref = list(hyp), list(ref)
        for n in range(1, 5):
            hgrams = Counter(tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1))
            rgrams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
            total[n - 1] += sum(hgrams.values())
            matched[n - 1] += sum(min(v, rgrams[g]) for g, v in hgrams.items())
    bp = 1.0 if c >= r else (0.0 if c == 0 else math.exp(1.0 - r / c))
    if any(t == 0 or m == 0 for m, t in zip(matched, total)):
        return 0.0, bp
    score = bp * math.exp(sum(math.log(m / t) for m, t in zip(matched, total)) / 4.0)
    return 100.0 * score, bp


def all_sequences(alphabet, max_len):
    """Every sequence over ``alphabet`` with length 0..max_len."""
    seqs = [()]
    frontier = [()]
    for _ in range(max_len):
        frontier = [s + (a,) for s in frontier for a in alphabet]
        seqs.extend(frontier)
    return seqs
