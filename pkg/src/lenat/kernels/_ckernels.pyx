# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled insert/delete edit alignment.

Behaviorally identical to lenat.kernels.pure.edit_ops; the DP fill and
traceback run over typed int32 buffers.
"""

import numpy as np


def edit_ops(hyp, ref):
    """See lenat.kernels.pure.edit_ops for the contract."""
    cdef int[::1] h = np.ascontiguousarray(hyp, dtype=np.int32)
    cdef int[::1] r = np.ascontiguousarray(ref, dtype=np.int32)
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t m = r.shape[0]

    dp_arr = np.empty((n + 1, m + 1), dtype=np.int32)
    cdef int[:, ::1] dp = dp_arr
    keep_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] keep = keep_arr
    ins_arr = np.empty(m, dtype=np.int32)
    cdef int[::1] ins_pos = ins_arr

    cdef Py_ssize_t i, j
    cdef int best, cand, hi

    dp[0, 0] = 0
    for i in range(1, n + 1):
        dp[i, 0] = <int> i
    for j in range(1, m + 1):
        dp[0, j] = <int> j
    for i in range(1, n + 1):
        hi = h[i - 1]
        for j in range(1, m + 1):
            best = dp[i - 1, j] + 1
            cand = dp[i, j - 1] + 1
            if cand < best:
                best = cand
            if hi == r[j - 1]:
                cand = dp[i - 1, j - 1]
                if cand < best:
                    best = cand
            dp[i, j] = best

    i = n
    j = m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and h[i - 1] == r[j - 1] and dp[i, j] == dp[i - 1, j - 1]:
            keep[i - 1] = 1
            ins_pos[j - 1] = -1
            i -= 1
            j -= 1
        elif i > 0 and dp[i, j] == dp[i - 1, j] + 1:
            i -= 1
        else:
            ins_pos[j - 1] = <int> i
            j -= 1

    return int(dp_arr[n, m]), keep_arr, ins_arr
