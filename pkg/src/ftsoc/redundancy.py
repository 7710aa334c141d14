"""Majority voters and triplicated register cells."""

from __future__ import annotations

from dataclasses import dataclass


def majority(a: int, b: int, c: int) -> int:
    return (a & b) | (a & c) | (b & c)


@dataclass(frozen=True)
class Vote3Result:
    value: int
    mismatch: bool
    dissenting: int | None = None


def vote3(a: int, b: int, c: int) -> Vote3Result:
    """Bitwise majority of three equal-width words.

    ``dissenting`` names the odd replica out when exactly one input differs
    from the other two.
    """
    v = majority(a, b, c)
    if a == b == c:
        return Vote3Result(v, False)
    if a == b:
        return Vote3Result(v, True, 2)
    if a == c:
        return Vote3Result(v, True, 1)
    if b == c:
        return Vote3Result(v, True, 0)
    return Vote3Result(v, True)


@dataclass(frozen=True)
class TmrCell:
    replicas: tuple[int, int, int]
    width: int

    @classmethod
    def reset(cls, width: int, value: int = 0) -> "TmrCell":
        return cls((value, value, value), width)

    @property
    def value(self) -> int:
        return majority(*self.replicas)

    def flip(self, replica: int, bit: int) -> "TmrCell":
        r = list(self.replicas)
        r[replica] ^= 1 << bit
        return TmrCell(tuple(r), self.width)


def tmr_cell_step(cell: TmrCell, next_values: tuple[int, int, int]) -> tuple[TmrCell, bool]:
    """Load each replica with the majority of the three next values.

    One voter per replica, so a fault on one voter output lands in a single
    replica only.
    """
    mask = (1 << cell.width) - 1
    a, b, c = (v & mask for v in next_values)
    v = majority(a, b, c)
    return TmrCell((v, v, v), cell.width), not (a == b == c)


def or_reduce(flags) -> bool:
    return any(flags)
