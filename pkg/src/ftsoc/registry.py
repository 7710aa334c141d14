"""Flat state registry holding every flip-flop of a simulated design.

All register state lives in one Python list so that snapshots are a list copy,
equality is a list compare and a fault is ``values[i] ^= 1 << bit``.  Fields
declared inside a triplicated group get three contiguous replica regions; the
logic only ever reads and writes replica 0 and the group is voted and mirrored
around each cycle.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Field:
    name: str
    width: int
    domain: str
    index: int
    replica: int | None = None


@dataclass
class TmrGroup:
    name: str
    domain: str
    lo: int
    n: int = 0
    source: str = "periph"  # fault-monitor source raised on replica mismatch
    members: list[int] = field(default_factory=list)

    def replica_index(self, index: int, k: int) -> int:
        return index + k * self.n


class StateRegistry:
    def __init__(self) -> None:
        self.values: list[int] = []
        self.fields: list[Field] = []
        self.by_name: dict[str, int] = {}
        self.groups: list[TmrGroup] = []
        self._open: TmrGroup | None = None
        self._pending: list[tuple[str, int, str, int]] = []
        self.compare_limit: int | None = None

    def __len__(self) -> int:
        return len(self.values)

    def add(self, name: str, width: int, domain: str, reset: int = 0) -> int:
        """Declare a field; returns the index logic should use (replica 0 in a group)."""
        if name in self.by_name:
            raise ValueError(f"duplicate field {name}")
        if self._open is not None:
            g = self._open
            idx = g.lo + g.n
            g.n += 1
            self._pending.append((name, width, domain, reset))
            g.members.append(idx)
            return idx
        idx = len(self.values)
        self.values.append(reset)
        self.fields.append(Field(name, width, domain, idx))
        self.by_name[name] = idx
        return idx

    def add_array(self, name: str, count: int, width: int, domain: str) -> list[int]:
        return [self.add(f"{name}[{i}]", width, domain) for i in range(count)]

    @contextmanager
    def tmr(self, name: str, domain: str, enabled: bool = True, source: str = "periph"):
        """Fields declared inside are triplicated when ``enabled``."""
        if not enabled:
            yield None
            return
        if self._open is not None:
            raise RuntimeError("nested TMR groups are not supported")
        g = TmrGroup(name, domain, len(self.values), source=source)
        self._open = g
        try:
            yield g
        finally:
            self._open = None
            pending, self._pending = self._pending, []
            for k in range(3):
                for name_, width, dom, reset in pending:
                    idx = len(self.values)
                    self.values.append(reset)
                    self.fields.append(Field(f"{name_}.r{k}", width, dom, idx, k))
                    if k == 0:
                        self.by_name[name_] = idx
                    self.by_name[f"{name_}.r{k}"] = idx
            if g.n:
                self.groups.append(g)

    def seal_compare(self) -> None:
        """Everything declared after this point is excluded from golden comparison."""
        self.compare_limit = len(self.values)

    def index(self, name: str) -> int:
        return self.by_name[name]

    def get(self, name: str) -> int:
        return self.values[self.by_name[name]]

    def set(self, name: str, value: int) -> None:
        self.values[self.by_name[name]] = value

    def group_of(self, index: int) -> TmrGroup | None:
        for g in self.groups:
            if g.lo <= index < g.lo + 3 * g.n:
                return g
        return None

    def state_bits(self, domains=None) -> int:
        return sum(f.width for f in self.fields if domains is None or f.domain in domains)

    def snapshot(self) -> list[int]:
        return self.values[:]

    def restore(self, snap: list[int]) -> None:
        self.values[:] = snap
