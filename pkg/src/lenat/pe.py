"""Positional encodings: sinusoidal, length-difference, and the perturbed
length-difference variant used for soft output-length control.

The length-difference encoding replaces the absolute position argument of
the classic sinusoid with the remaining length ``len - pos``; the perturbed
variant adds an integer offset ``per`` drawn uniformly from a configured
range, so the decoder sees ``len - pos + per``.  Remaining length hitting
zero is the "emit EOS now" anchor; positions past the constraint produce
negative arguments, which are computed as-is (over-length decoding stays
well-defined).

All tables are float64 so tests can compare against scalar evaluation at
1e-12.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class PEKind(enum.Enum):
    SINUSOIDAL = "sinusoidal"
    LDPE = "ldpe"
    PERLDPE = "perldpe"


@dataclass(frozen=True)
class PerturbationRange:
    """Inclusive integer bounds for the length perturbation."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"perturbation range has lo > hi: [{self.lo}, {self.hi}]")

    @staticmethod
    def parse(text: str) -> "PerturbationRange":
        """Parse 'lo,hi' (e.g. '-4,4')."""
        parts = text.split(",")
        if len(parts) != 2:
            raise ValueError(f"expected 'lo,hi', got {text!r}")
        return PerturbationRange(int(parts[0]), int(parts[1]))


@dataclass(frozen=True)
class PETable:
    """Precomputed encoding rows; ``rows[p]`` is the vector for position p."""

    kind: PEKind
    rows: np.ndarray  # [max_pos, d] float64
    len_used: int
    per_used: int


def _check_dim(d: int):
    if d < 2 or d % 2 != 0:
        raise ValueError(f"embedding dimension must be even and >= 2, got {d}")


def _angles(arg: float, d: int) -> np.ndarray:
    # arg / 10000^(2i/d) for i in 0..d/2-1
    i = np.arange(d // 2, dtype=np.float64)
    return arg / np.power(10000.0, 2.0 * i / d)


def sinusoidal_pe(pos: int, d: int) -> np.ndarray:
    """Classic sinusoidal encoding: even dims sin(pos/10000^(2i/d)), odd dims cos."""
    _check_dim(d)
    if pos < 0:
        raise ValueError(f"pos must be >= 0, got {pos}")
    theta = _angles(float(pos), d)
    out = np.empty(d, dtype=np.float64)
    out[0::2] = np.sin(theta)
    out[1::2] = np.cos(theta)
    return out


def perldpe(pos: int, length: int, per: int, d: int) -> np.ndarray:
    """Perturbed length-difference encoding of a single position.

    Even dims sin((len-pos+per)/10000^(2i/d)), odd dims cos of the same.
    ``per=0`` is plain LDPE.  Negative arguments are legal.
    """
    _check_dim(d)
    theta = _angles(float(length - pos + per), d)
    out = np.empty(d, dtype=np.float64)
    out[0::2] = np.sin(theta)
    out[1::2] = np.cos(theta)
    return out


def ldpe(pos: int, length: int, d: int) -> np.ndarray:
    """Length-difference encoding (perturbation 0)."""
    return perldpe(pos, length, 0, d)


def sample_perturbation(rng: np.random.Generator, range_: PerturbationRange) -> int:
    """Uniform integer draw from [lo, hi] inclusive."""
    return int(rng.integers(range_.lo, range_.hi + 1))


def build_pe_table(
    kind: PEKind, length: int, per: int, max_pos: int, d: int
) -> PETable:
    """Precompute rows 0..max_pos-1 of the selected encoding.

    For SINUSOIDAL, ``length`` and ``per`` are ignored; for LDPE, ``per``
    is forced to 0.
    """
    _check_dim(d)
    if max_pos < 1:
        raise ValueError(f"max_pos must be >= 1, got {max_pos}")
    pos = np.arange(max_pos, dtype=np.float64)[:, None]
    i = np.arange(d // 2, dtype=np.float64)[None, :]
    denom = np.power(10000.0, 2.0 * i / d)
    if kind is PEKind.SINUSOIDAL:
        arg = pos
        length_used, per_used = 0, 0
    else:
        per_used = 0 if kind is PEKind.LDPE else int(per)
        length_used = int(length)
        arg = (length_used - pos) + per_used
    theta = arg / denom
    rows = np.empty((max_pos, d), dtype=np.float64)
    rows[:, 0::2] = np.sin(theta)
    rows[:, 1::2] = np.cos(theta)
    return PETable(kind=kind, rows=rows, len_used=length_used, per_used=per_used)
