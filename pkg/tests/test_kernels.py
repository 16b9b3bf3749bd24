"""Edit-alignment kernel: pure/compiled equivalence and distance oracle."""

import numpy as np
import pytest

from helpers import all_sequences, insdel_distance
from lenat.kernels import IMPL, compiled_edit_ops, edit_ops, pure_edit_ops


def reconstruct(hyp, ref, keep, ins_pos):
    """Replay the alignment: surviving hyp tokens with ref tokens inserted."""
    out = []
    # walk ref in order; matched ref tokens consume surviving hyp tokens
    survivors = [hyp[i] for i, k in enumerate(keep) if k]
    taken = 0
    for j, pos in enumerate(ins_pos):
        if pos < 0:
            out.append(survivors[taken])
            taken += 1
        else:
            out.append(ref[j])
    assert taken == len(survivors)
    return out


class TestKernel:
    def test_active_impl_reported(self):
        assert IMPL in ("compiled", "pure")

    def test_simple_cases(self):
        dist, keep, ins = edit_ops(np.array([1, 9, 2], np.int32), np.array([1, 2], np.int32))
        assert dist == 1
        assert list(keep) == [1, 0, 1]
        assert list(ins) == [-1, -1]

        dist, keep, ins = edit_ops(np.array([1, 3], np.int32), np.array([1, 2, 3], np.int32))
        assert dist == 1
        assert list(keep) == [1, 1]
        assert list(ins) == [-1, 1, -1]

    def test_empty_hypothesis(self):
        dist, keep, ins = edit_ops(np.array([], np.int32), np.array([5, 6], np.int32))
        assert dist == 2
        assert keep.size == 0
        assert list(ins) == [0, 0]

    def test_empty_reference(self):
        dist, keep, ins = edit_ops(np.array([5, 6], np.int32), np.array([], np.int32))
        assert dist == 2
        assert list(keep) == [0, 0]
        assert ins.size == 0

    def test_distance_matches_lcs_oracle_random(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            h = rng.integers(0, 3, size=rng.integers(0, 9)).astype(np.int32)
            r = rng.integers(0, 3, size=rng.integers(0, 9)).astype(np.int32)
            dist, keep, ins = edit_ops(h, r)
            assert dist == insdel_distance(h, r)
            assert reconstruct(list(h), list(r), keep, ins) == list(r)
            # cost decomposition: deletions + insertions
            assert dist == int((keep == 0).sum()) + int((ins >= 0).sum())

    def test_exhaustive_small(self):
        seqs = all_sequences((0, 1, 2), 3)
        for h in seqs:
            ha = np.array(h, np.int32)
            for r in seqs:
                ra = np.array(r, np.int32)
                dist, keep, ins = edit_ops(ha, ra)
                assert dist == insdel_distance(h, r)
                assert reconstruct(list(h), list(r), keep, ins) == list(r)

    @pytest.mark.skipif(compiled_edit_ops is None, reason="extension not built")
    def test_pure_and_compiled_identical(self):
        rng = np.random.default_rng(1)
        for _ in range(3000):
            h = rng.integers(0, 4, size=rng.integers(0, 12)).astype(np.int32)
            r = rng.integers(0, 4, size=rng.integers(0, 12)).astype(np.int32)
            dp, kp, ip = pure_edit_ops(h, r)
            dc, kc, ic = compiled_edit_ops(h, r)
            assert dp == dc
            assert np.array_equal(kp, kc)
            assert np.array_equal(ip, ic)

    def test_accepts_plain_lists(self):
        dist, keep, ins = edit_ops([1, 2], [2])
        assert dist == 1
        assert list(keep) == [0, 1]
