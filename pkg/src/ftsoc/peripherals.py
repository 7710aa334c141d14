"""Timer, UART transmitter, GPIO, control block and fault-monitor counters.

Register offsets are relative to the peripheral base (``0x0001_0000``)::

    0x000 timer counter     0x004 timer compare   0x008 timer armed
    0x00c timer irq pending (write clears)
    0x100 uart tx (write)   0x104 uart status (bit 0 = busy)
    0x200 gpio out
    0x300 return value      0x304 scrub enable    0x308 monitor clear
    0x30c setup done
    0x400 + 4k  monitor counter k (read only)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .registry import StateRegistry

T_COUNTER = 0x000
T_COMPARE = 0x004
T_CTRL = 0x008
T_PENDING = 0x00C
U_TX = 0x100
U_STATUS = 0x104
G_OUT = 0x200
C_RETVAL = 0x300
C_SCRUB = 0x304
C_MONCLR = 0x308
C_SETUP = 0x30C
MON_BASE = 0x400

MON_SOURCES = ("core", "ecc_corr", "ecc_unc", "bus", "periph")
COUNTER_MAX = 0xFFFF

_BE = tuple(sum(0xFF << (8 * i) for i in range(4) if be >> i & 1) for be in range(16))


class PeriphRegs:
    """Indices of the peripheral registers inside a state registry."""

    def __init__(self, reg: StateRegistry, uart_divider: int = 16, prdata_bits: int = 32):
        self.divider = uart_divider
        self.counter = reg.add("timer.counter", 32, "periph")
        self.compare = reg.add("timer.compare", 32, "periph")
        self.armed = reg.add("timer.armed", 1, "periph")
        self.pending = reg.add("timer.pending", 1, "periph")
        self.shift = reg.add("uart.shift", 10, "periph")
        self.bits = reg.add("uart.bits", 4, "periph")
        self.div = reg.add("uart.div", max(1, (uart_divider - 1).bit_length()), "periph")
        self.gpio = reg.add("gpio.out", 32, "periph")
        self.retval = reg.add("ctrl.retval", 32, "periph")
        self.scrub_en = reg.add("ctrl.scrub_en", 1, "periph")
        self.setup_done = reg.add("ctrl.setup_done", 1, "periph")
        self.prdata = reg.add("bridge.rdata", prdata_bits, "periph")


class MonitorRegs:
    """Fault counters plus the one-cycle pipeline latch in front of them."""

    def __init__(self, reg: StateRegistry):
        self.latch = [reg.add(f"monitor.latch.{n}", 1, "monitor") for n in MON_SOURCES]
        self.counters = [reg.add(f"monitor.count.{n}", 16, "monitor") for n in MON_SOURCES]


def uart_tx(s, p: PeriphRegs) -> int:
    return s[p.shift] & 1 if s[p.bits] else 1


def mmio_valid(off: int, write: int) -> bool:
    if off in (T_COUNTER, T_COMPARE, T_CTRL, T_PENDING, U_TX, U_STATUS, G_OUT,
               C_RETVAL, C_SCRUB, C_MONCLR, C_SETUP):
        return True
    return not write and MON_BASE <= off < MON_BASE + 4 * len(MON_SOURCES) and not off & 3


def mmio_read(s, p: PeriphRegs, m: MonitorRegs | None, off: int) -> int:
    if off == T_COUNTER:
        return s[p.counter]
    if off == T_COMPARE:
        return s[p.compare]
    if off == T_CTRL:
        return s[p.armed]
    if off == T_PENDING:
        return s[p.pending]
    if off == U_STATUS:
        return 1 if s[p.bits] else 0
    if off == G_OUT:
        return s[p.gpio]
    if off == C_RETVAL:
        return s[p.retval]
    if off == C_SCRUB:
        return s[p.scrub_en]
    if off == C_SETUP:
        return s[p.setup_done]
    if off >= MON_BASE:
        return s[m.counters[(off - MON_BASE) >> 2]] if m is not None else 0
    return 0


def tick(s, p: PeriphRegs) -> None:
    """Free-running parts: timer count and compare match, UART shifting."""
    c = s[p.counter]
    if s[p.armed] and c == s[p.compare]:
        s[p.pending] = 1
    s[p.counter] = (c + 1) & 0xFFFFFFFF
    if s[p.bits]:
        d = s[p.div] + 1
        if d >= p.divider:
            s[p.div] = 0
            s[p.shift] >>= 1
            s[p.bits] -= 1
        else:
            s[p.div] = d


def mmio_write(s, p: PeriphRegs, m: MonitorRegs | None, off: int, wdata: int, be: int) -> None:
    mask = _BE[be & 0xF]

    def merge(i):
        s[i] = (s[i] & ~mask) | (wdata & mask)

    if off == T_COUNTER:
        merge(p.counter)
    elif off == T_COMPARE:
        merge(p.compare)
    elif off == T_CTRL:
        s[p.armed] = wdata & mask & 1
    elif off == T_PENDING:
        s[p.pending] = 0
    elif off == U_TX:
        if not s[p.bits]:
            s[p.shift] = 1 << 9 | (wdata & 0xFF) << 1
            s[p.bits] = 10
            s[p.div] = 0
    elif off == G_OUT:
        merge(p.gpio)
    elif off == C_RETVAL:
        merge(p.retval)
    elif off == C_SCRUB:
        s[p.scrub_en] = wdata & mask & 1
    elif off == C_MONCLR:
        if m is not None:
            for i in m.counters + m.latch:
                s[i] = 0
    elif off == C_SETUP:
        s[p.setup_done] = wdata & mask & 1


def periph_cycle(s, p: PeriphRegs, m: MonitorRegs | None, req) -> int:
    """One peripheral cycle with an optional granted MMIO request.

    ``req`` is ``(write, offset, wdata, be)`` or None.  Read data lands in the
    bridge latch; returns 1 when the request hit an unmapped offset.
    """
    if req is not None and not req[0]:
        off = req[1]
        if not mmio_valid(off, 0):
            tick(s, p)
            return 1
        s[p.prdata] = mmio_read(s, p, m, off)
    tick(s, p)
    if req is not None and req[0]:
        if not mmio_valid(req[1], 1):
            return 1
        mmio_write(s, p, m, req[1], req[2], req[3])
    return 0


def monitor_cycle(s, m: MonitorRegs, flags) -> None:
    """Count last cycle's latched flags, then latch this cycle's."""
    for i, c in zip(m.latch, m.counters):
        if s[i] and s[c] < COUNTER_MAX:
            s[c] += 1
    for i, f in zip(m.latch, flags):
        s[i] = 1 if f else 0


def monitor_readout(s, m: MonitorRegs) -> dict[str, int]:
    return {n: s[c] for n, c in zip(MON_SOURCES, m.counters)}


# ---------------------------------------------------------------------------
# Standalone peripheral set.


@dataclass
class PeriphPins:
    uart_tx: int
    gpio: int
    irq: int


class Peripherals:
    """Peripherals plus monitor on a private registry, optionally triplicated.

    With ``tmr=True`` every peripheral register sits in one TMR group; a step
    votes the group first and reports a mismatch to the monitor.
    """

    def __init__(self, uart_divider: int = 16, tmr: bool = False):
        self.reg = StateRegistry()
        with self.reg.tmr("periph", "periph", enabled=tmr, source="periph") as g:
            self.p = PeriphRegs(self.reg, uart_divider)
        self.group = g
        self.reg.seal_compare()
        self.m = MonitorRegs(self.reg)

    @property
    def s(self):
        return self.reg.values

    def pins(self) -> PeriphPins:
        s = self.s
        return PeriphPins(uart_tx(s, self.p), s[self.p.gpio], s[self.p.pending])

    def step(self, req=None, extra_flags=(0, 0, 0, 0, 0)) -> tuple[PeriphPins, int]:
        s = self.s
        flags = list(extra_flags)
        g = self.group
        if g is not None:
            lo, n = g.lo, g.n
            a, b, c = s[lo:lo + n], s[lo + n:lo + 2 * n], s[lo + 2 * n:lo + 3 * n]
            if not a == b == c:
                flags[4] = 1
                s[lo:lo + n] = [(x & y) | (x & z) | (y & z) for x, y, z in zip(a, b, c)]
        err = periph_cycle(s, self.p, self.m, req)
        monitor_cycle(s, self.m, flags)
        if g is not None:
            s[lo + n:lo + 2 * n] = s[lo:lo + n]
            s[lo + 2 * n:lo + 3 * n] = s[lo:lo + n]
        return self.pins(), err

    def read(self, off: int) -> int:
        self.step((0, off, 0, 0xF))
        return self.s[self.p.prdata]

    def write(self, off: int, value: int, be: int = 0xF) -> int:
        return self.step((1, off, value, be))[1]

    def monitor(self) -> dict[str, int]:
        return monitor_readout(self.s, self.m)


def periph_step(periph: Peripherals, mmio=None):
    """Advance the standalone peripherals one cycle; returns ``(pins, error)``."""
    return periph.step(mmio)


def decode_uart(trace, divider: int = 16) -> bytes:
    """Recover 8N1 bytes from a per-cycle tx pin trace (sampling mid-bit)."""
    out = bytearray()
    i, n = 0, len(trace)
    while i < n:
        if trace[i] == 0:
            mid = i + divider // 2
            if mid + 9 * divider >= n:
                break
            byte = 0
            for k in range(8):
                byte |= trace[mid + (k + 1) * divider] << k
            if trace[mid + 9 * divider] != 1:
                raise ValueError(f"framing error at cycle {i}")
            out.append(byte)
            i = mid + 9 * divider
        else:
            i += 1
    return bytes(out)


PIN_TRACE_HEADER = ("cycle", "uart_tx", "gpio_hex", "busy", "exception")


def write_pin_trace(path, rows) -> None:
    """Rows are ``(cycle, uart_tx, gpio, busy, exception)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PIN_TRACE_HEADER)
        for c, tx, gpio, busy, exc in rows:
            w.writerow((c, tx, f"{gpio:08x}", busy, exc))


def read_pin_trace(path) -> list[tuple[int, int, int, int, int]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        return [(int(c), int(tx), int(g, 16), int(b), int(e)) for c, tx, g, b, e in r]
