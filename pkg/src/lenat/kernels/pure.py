"""Pure-Python insert/delete edit alignment (fallback for the compiled kernel).

Must stay behaviorally identical to _ckernels.edit_ops: same distances and
the same deterministic tie-breaking (match preferred over delete over
insert during traceback from the end).
"""

from __future__ import annotations

import numpy as np


def edit_ops(hyp, ref):
    """Align ``hyp`` to ``ref`` under insert/delete edits (substitution = 2).

    Returns (dist, keep, ins_pos):
      dist    - minimal number of single-token inserts + deletes
      keep    - uint8[len(hyp)], 1 where the hypothesis token survives
      ins_pos - int32[len(ref)], for an inserted ref token the number of
                hypothesis tokens strictly before its insertion point,
                -1 where the ref token is matched to a kept hyp token.
    """
    h = list(hyp)
    r = list(ref)
    n, m = len(h), len(r)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = i
    for j in range(1, m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        hi = h[i - 1]
        row, prev = dp[i], dp[i - 1]
        for j in range(1, m + 1):
            best = prev[j] + 1  # delete hyp[i-1]
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1  # insert ref[j-1]
            if hi == r[j - 1] and prev[j - 1] < best:
                best = prev[j - 1]
            row[j] = best

    keep = np.zeros(n, dtype=np.uint8)
    ins_pos = np.empty(m, dtype=np.int32)
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and h[i - 1] == r[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            keep[i - 1] = 1
            ins_pos[j - 1] = -1
            i -= 1
            j -= 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            i -= 1  # delete: keep[i-1] stays 0
        else:
            ins_pos[j - 1] = i
            j -= 1
    return dp[n][m], keep, ins_pos
