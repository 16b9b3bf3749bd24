"""Sequence packing for training: a batch of variable-length sentences is
concatenated along time, with additive attention masks keeping sentences
from attending across their block boundaries.  This removes padding and
turns a batch step into one compute graph.
"""

from __future__ import annotations

import numpy as np

NEG = -1e9


def offsets_of(lengths) -> np.ndarray:
    """Start offset of each block in the packed sequence."""
    return np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)


def block_self_mask(lengths, causal: bool = False) -> np.ndarray:
    """Additive [T, T] mask allowing attention within each block only."""
    total = int(np.sum(lengths))
    mask = np.full((total, total), NEG)
    at = 0
    for n in lengths:
        block = mask[at : at + n, at : at + n]
        block[...] = np.triu(np.full((n, n), NEG), k=1) if causal else 0.0
        at += n
    return mask


def block_cross_mask(q_lengths, kv_lengths, kv_map=None) -> np.ndarray:
    """Additive [Tq, Tkv] mask pairing query block j with key/value block
    kv_map[j] (identity pairing by default)."""
    if kv_map is None:
        kv_map = range(len(q_lengths))
        if len(q_lengths) != len(kv_lengths):
            raise ValueError("query and key block counts differ")
    kv_off = offsets_of(kv_lengths)
    mask = np.full((int(np.sum(q_lengths)), int(np.sum(kv_lengths))), NEG)
    qa = 0
    for qn, kb in zip(q_lengths, kv_map):
        ka, kn = int(kv_off[kb]), int(kv_lengths[kb])
        mask[qa : qa + qn, ka : ka + kn] = 0.0
        qa += qn
    return mask


def pack_ids(chunks) -> np.ndarray:
    return np.concatenate([np.asarray(c, dtype=np.int64) for c in chunks])


def pack_rows(row_chunks) -> np.ndarray:
    return np.concatenate(row_chunks, axis=0)
