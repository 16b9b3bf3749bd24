"""Positional-encoding exactness, identities, and perturbation sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lenat.pe import (
    PEKind,
    PerturbationRange,
    build_pe_table,
    ldpe,
    perldpe,
    sample_perturbation,
    sinusoidal_pe,
)


def scalar_pe(arg: float, d: int) -> np.ndarray:
    """Independent scalar evaluation of the defining sin/cos formula."""
    out = np.empty(d)
    for i in range(d // 2):
        theta = arg / 10000 ** (2 * i / d)
        out[2 * i] = math.sin(theta)
        out[2 * i + 1] = math.cos(theta)
    return out


class TestSinusoidal:
    def test_pos_zero(self):
        assert np.array_equal(sinusoidal_pe(0, 4), [0.0, 1.0, 0.0, 1.0])

    def test_pos_one_d_two(self):
        got = sinusoidal_pe(1, 2)
        assert got == pytest.approx([math.sin(1.0), math.cos(1.0)], abs=1e-15)

    def test_pos_three_d_four(self):
        expected = [math.sin(3.0), math.cos(3.0), math.sin(0.03), math.cos(0.03)]
        assert sinusoidal_pe(3, 4) == pytest.approx(expected, abs=1e-15)

    def test_odd_dim_rejected(self):
        with pytest.raises(ValueError):
            sinusoidal_pe(0, 5)

    def test_negative_pos_rejected(self):
        with pytest.raises(ValueError):
            sinusoidal_pe(-1, 4)


class TestPerLDPE:
    def test_pos_equals_len(self):
        assert np.array_equal(perldpe(5, 5, 0, 4), [0.0, 1.0, 0.0, 1.0])

    def test_worked_example(self):
        expected = [math.sin(11.0), math.cos(11.0), math.sin(0.11), math.cos(0.11)]
        assert perldpe(2, 10, 3, 4) == pytest.approx(expected, abs=1e-15)

    def test_negative_argument_is_legal(self):
        got = perldpe(9, 5, 0, 2)
        assert got == pytest.approx([math.sin(-4.0), math.cos(-4.0)], abs=1e-15)

    def test_matches_scalar_eval_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            pos = int(rng.integers(0, 200))
            length = int(rng.integers(0, 200))
            per = int(rng.integers(-6, 7))
            d = 2 * int(rng.integers(1, 33))
            got = perldpe(pos, length, per, d)
            want = scalar_pe(length - pos + per, d)
            assert np.max(np.abs(got - want)) < 1e-12

    @given(
        pos=st.integers(0, 500),
        length=st.integers(0, 500),
        per=st.integers(-8, 8),
        c=st.integers(0, 100),
        half_d=st.integers(1, 16),
    )
    @settings(max_examples=80, deadline=None)
    def test_shift_identity(self, pos, length, per, c, half_d):
        d = 2 * half_d
        a = perldpe(pos, length, per, d)
        b = perldpe(pos + c, length + c, per, d)
        assert np.array_equal(a, b)

    @given(pos=st.integers(0, 300), extra=st.integers(0, 300), half_d=st.integers(1, 16))
    @settings(max_examples=80, deadline=None)
    def test_reduction_to_sinusoidal(self, pos, extra, half_d):
        d = 2 * half_d
        length = pos + extra
        assert np.array_equal(ldpe(pos, length, d), perldpe(pos, length, 0, d))
        assert np.array_equal(ldpe(pos, length, d), sinusoidal_pe(length - pos, d))

    def test_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            pos = int(rng.integers(0, 10_000))
            length = int(rng.integers(0, 10_000))
            d = 2 * int(rng.integers(1, 257))
            assert np.all(np.abs(perldpe(pos, length, 4, d)) <= 1.0)


class TestSampling:
    def test_degenerate_range(self):
        rng = np.random.default_rng(0)
        assert all(
            sample_perturbation(rng, PerturbationRange(0, 0)) == 0 for _ in range(50)
        )

    def test_full_coverage(self):
        rng = np.random.default_rng(0)
        seen = {sample_perturbation(rng, PerturbationRange(-4, 4)) for _ in range(10_000)}
        assert seen == set(range(-4, 5))

    def test_student_range_support(self):
        rng = np.random.default_rng(0)
        draws = {sample_perturbation(rng, PerturbationRange(0, 2)) for _ in range(1000)}
        assert draws <= {0, 1, 2}

    def test_determinism(self):
        a = np.random.default_rng(7)
        b = np.random.default_rng(7)
        r = PerturbationRange(-4, 4)
        assert [sample_perturbation(a, r) for _ in range(100)] == [
            sample_perturbation(b, r) for _ in range(100)
        ]

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            PerturbationRange(3, 1)

    def test_parse(self):
        assert PerturbationRange.parse("-4,4") == PerturbationRange(-4, 4)
        with pytest.raises(ValueError):
            PerturbationRange.parse("4")


class TestTable:
    def test_single_sinusoidal_row(self):
        table = build_pe_table(PEKind.SINUSOIDAL, 0, 0, 1, 4)
        assert np.array_equal(table.rows, [[0.0, 1.0, 0.0, 1.0]])

    def test_perldpe_end_row_zero_per(self):
        table = build_pe_table(PEKind.PERLDPE, 4, 0, 5, 2)
        assert np.array_equal(table.rows[4], [0.0, 1.0])

    def test_perldpe_end_row_with_per(self):
        table = build_pe_table(PEKind.PERLDPE, 4, 1, 5, 2)
        assert table.rows[4] == pytest.approx([math.sin(1.0), math.cos(1.0)], abs=1e-15)

    def test_rows_match_scalar_ops(self):
        table = build_pe_table(PEKind.PERLDPE, 10, 3, 16, 8)
        for p in range(16):
            assert np.max(np.abs(table.rows[p] - perldpe(p, 10, 3, 8))) < 1e-15
        sin_table = build_pe_table(PEKind.SINUSOIDAL, 99, 99, 12, 8)
        for p in range(12):
            assert np.array_equal(sin_table.rows[p], sinusoidal_pe(p, 8))

    def test_ldpe_ignores_per(self):
        a = build_pe_table(PEKind.LDPE, 6, 3, 8, 4)
        b = build_pe_table(PEKind.LDPE, 6, 0, 8, 4)
        assert np.array_equal(a.rows, b.rows)
        assert a.per_used == 0

    def test_bad_max_pos(self):
        with pytest.raises(ValueError):
            build_pe_table(PEKind.SINUSOIDAL, 0, 0, 0, 4)
