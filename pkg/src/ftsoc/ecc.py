"""(39,32) SECDED Hsiao code.

Codeword layout: data bits occupy positions 0..31 (little-endian), the seven
check bits occupy positions 32..38.  Data columns of the parity-check matrix
are the first 32 weight-3 7-bit values in ascending integer order, check
columns form the identity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations

import numpy as np

DATA_BITS = 32
CHECK_BITS = 7
CODE_BITS = DATA_BITS + CHECK_BITS
DATA_MASK = (1 << DATA_BITS) - 1
CODE_MASK = (1 << CODE_BITS) - 1


def _weight3_columns(n: int) -> list[int]:
    cols = sorted(sum(1 << b for b in bits) for bits in combinations(range(CHECK_BITS), 3))
    if len(cols) < n:
        raise ValueError(f"only {len(cols)} weight-3 columns available, need {n}")
    return cols[:n]


# Column k of H as a 7-bit integer (bit r = row r).
COLUMNS: tuple[int, ...] = tuple(_weight3_columns(DATA_BITS) + [1 << i for i in range(CHECK_BITS)])

_SYNDROME_TO_BIT = {c: k for k, c in enumerate(COLUMNS)}


def _byte_table(shift: int) -> list[int]:
    table = []
    for v in range(256):
        p = 0
        for b in range(8):
            if v >> b & 1:
                p ^= COLUMNS[shift + b]
        table.append(p)
    return table


_T0, _T1, _T2, _T3 = (_byte_table(8 * i) for i in range(4))


def build_matrix() -> np.ndarray:
    """Return the 7x39 parity-check matrix H as a uint8 array."""
    h = np.zeros((CHECK_BITS, CODE_BITS), dtype=np.uint8)
    for k, col in enumerate(COLUMNS):
        for r in range(CHECK_BITS):
            h[r, k] = col >> r & 1
    return h


class Status(enum.IntEnum):
    CLEAN = 0
    CORRECTED = 1
    UNCORRECTABLE = 2


@dataclass(frozen=True)
class DecodeResult:
    data: int
    status: Status
    bit: int | None = None  # corrected codeword position


def check_bits(d: int) -> int:
    return _T0[d & 0xFF] ^ _T1[d >> 8 & 0xFF] ^ _T2[d >> 16 & 0xFF] ^ _T3[d >> 24 & 0xFF]


def encode(d: int) -> int:
    d &= DATA_MASK
    return d | check_bits(d) << DATA_BITS


def syndrome(c: int) -> int:
    d = c & DATA_MASK
    return _T0[d & 0xFF] ^ _T1[d >> 8 & 0xFF] ^ _T2[d >> 16 & 0xFF] ^ _T3[d >> 24 & 0xFF] ^ (c >> DATA_BITS & 0x7F)


def decode(c: int) -> DecodeResult:
    s = syndrome(c)
    if s == 0:
        return DecodeResult(c & DATA_MASK, Status.CLEAN)
    k = _SYNDROME_TO_BIT.get(s)
    if k is None:
        # Even-weight syndromes are double errors; the three unused weight-3
        # patterns and weight 5/7 can only arise from >=3 flips.
        return DecodeResult(c & DATA_MASK, Status.UNCORRECTABLE)
    return DecodeResult((c ^ (1 << k)) & DATA_MASK, Status.CORRECTED, k)


def decode_fast(c: int) -> tuple[int, int]:
    """Hot-path decode returning ``(data, status)`` without allocating a result object."""
    d = c & DATA_MASK
    s = _T0[d & 0xFF] ^ _T1[d >> 8 & 0xFF] ^ _T2[d >> 16 & 0xFF] ^ _T3[d >> 24 & 0xFF] ^ (c >> DATA_BITS & 0x7F)
    if not s:
        return d, 0
    k = _SYNDROME_TO_BIT.get(s)
    if k is None:
        return d, 2
    return (c ^ (1 << k)) & DATA_MASK, 1


def correct(c: int) -> tuple[int, int]:
    """Return ``(codeword, status)`` with a single-bit error repaired in place."""
    s = syndrome(c)
    if not s:
        return c, 0
    k = _SYNDROME_TO_BIT.get(s)
    if k is None:
        return c, 2
    return c ^ (1 << k), 1


def flip(c: int, *bits: int) -> int:
    for b in bits:
        c ^= 1 << b
    return c
