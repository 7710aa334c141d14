"""SRAM banks with byte-wise read-modify-write and a deferring scrubber.

A bank is split in two: :class:`SramBank` owns the storage array(s) and
:class:`BankCtl` holds the indices of the controller registers (read-data
latch, RMW stall bit, scrubber pointer and fix queue) inside the flat state
list.  :class:`MemoryBank` glues both to a private registry for standalone use.

The scrubber only visits a word on cycles where the bank has no bus access.
The instruction bank is fetched almost every cycle while the core runs, so it
is swept mostly while the core sleeps in ``wfi``; a program that never sleeps
starves the scrubber on that bank.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ecc
from .redundancy import majority
from .registry import StateRegistry

RAW = "raw"
ECC = "ecc"
TRIPLE = "triple"

_BYTE_MASKS = tuple(
    sum(0xFF << (8 * i) for i in range(4) if be >> i & 1) for be in range(16)
)


def byte_mask(be: int) -> int:
    return _BYTE_MASKS[be & 0xF]


class SramBank:
    """Storage of one bank: raw words, 39-bit codewords, or three raw copies."""

    def __init__(self, words: int = 2048, mode: str = RAW):
        if mode not in (RAW, ECC, TRIPLE):
            raise ValueError(f"unknown bank mode {mode!r}")
        self.mode = mode
        self.words = words
        self.arrays = [[0] * words for _ in range(3 if mode == TRIPLE else 1)]
        self.cell_bits = ecc.CODE_BITS if mode == ECC else 32

    def load(self, image, offset: int = 0) -> None:
        for i, w in enumerate(image):
            v = ecc.encode(w) if self.mode == ECC else w & 0xFFFFFFFF
            for arr in self.arrays:
                arr[offset + i] = v

    def data(self, idx: int) -> int:
        """Architectural (decoded or voted) value of a word."""
        if self.mode == ECC:
            return ecc.decode_fast(self.arrays[0][idx])[0]
        if self.mode == TRIPLE:
            a = self.arrays
            return majority(a[0][idx], a[1][idx], a[2][idx])
        return self.arrays[0][idx]

    def dump(self) -> list[str]:
        """One line per word: ``addr_hex: codeword_hex syndrome_hex``."""
        out = []
        for i in range(self.words):
            if self.mode == ECC:
                c = self.arrays[0][i]
                out.append(f"{i * 4:08x}: {c:010x} {ecc.syndrome(c):02x}")
            elif self.mode == TRIPLE:
                w = self.arrays
                out.append(f"{i * 4:08x}: {w[0][i]:08x}{w[1][i]:08x}{w[2][i]:08x} 00")
            else:
                out.append(f"{i * 4:08x}: {self.arrays[0][i]:08x} 00")
        return out


@dataclass
class AccessResult:
    corrected: int = 0
    uncorrectable: int = 0


class BankCtl:
    """Bank controller logic over registry-resident registers.

    ``overlap`` means write payloads already arrive as codewords and are stored
    verbatim; otherwise the bank owns the encoder.
    """

    def __init__(self, reg: StateRegistry, name: str, sram: SramBank, overlap: bool = False,
                 scrub_period: int = 1, fix_depth: int = 2):
        self.sram = sram
        self.name = name
        self.overlap = overlap
        self.period = max(1, scrub_period)
        self.words = sram.words
        self.ecc = sram.mode == ECC
        ib = max(1, (sram.words - 1).bit_length())
        self.rdata = reg.add(f"{name}.rdata", sram.cell_bits, "mem_ctl")
        self.aid = 0  # global id of this bank's first array
        self.cycle = 0
        self.log = None  # (cycle, index) per array access, when recording
        self.dirty = None  # (array id, index) written, when tracking
        self.undo = None  # (array id, index, old value) per write, when set
        self.fix_depth = fix_depth
        self.drops = 0

    def declare_ctl(self, reg: StateRegistry, ib: int | None = None) -> None:
        """Declare the stall bit and scrubber registers (may sit inside a TMR group)."""
        name = self.name
        ib = ib or max(1, (self.words - 1).bit_length())
        self.busy = reg.add(f"{name}.rmw_busy", 1, "mem_ctl")
        if self.ecc:
            self.s_next = reg.add(f"{name}.scrub.next", ib, "mem_ctl")
            self.s_cnt = reg.add(f"{name}.scrub.count", max(1, (self.period - 1).bit_length()), "mem_ctl")
            self.fq = [(reg.add(f"{name}.fixq{k}.valid", 1, "mem_ctl"),
                        reg.add(f"{name}.fixq{k}.index", ib, "mem_ctl")) for k in range(self.fix_depth)]

    # -- array helpers --------------------------------------------------------

    def _store(self, idx: int, v: int, copy=None) -> None:
        arrs = self.sram.arrays
        if self.undo is not None:
            for k in (range(len(arrs)) if copy is None else (copy,)):
                self.undo.append((self.aid + k, idx, arrs[k][idx]))
        if copy is None:
            for k, arr in enumerate(arrs):
                arr[idx] = v
                if self.dirty is not None:
                    self.dirty.add((self.aid + k, idx))
        else:
            arrs[copy][idx] = v
            if self.dirty is not None:
                self.dirty.add((self.aid + copy, idx))

    # -- external access ------------------------------------------------------

    def access(self, s, write: int, idx: int, payload: int, be: int, res: AccessResult,
               tap=None, taps=None, copy=None) -> None:
        """Serve one granted access; read data lands in the ``rdata`` latch."""
        arrs = self.sram.arrays
        mode = self.sram.mode
        if self.log is not None:
            self.log.append((self.cycle, idx))
        if not write:
            if mode == ECC:
                c = arrs[0][idx]
                _, st = ecc.decode_fast(c)
                if st == 1:
                    res.corrected += 1
                    self._push_fix(s, idx)
                elif st == 2:
                    res.uncorrectable += 1
                s[self.rdata] = c
            elif mode == TRIPLE:
                s[self.rdata] = majority(arrs[0][idx], arrs[1][idx], arrs[2][idx])
            else:
                s[self.rdata] = arrs[0][idx]
            return
        if mode == ECC:
            if be == 0xF:
                if self.overlap:
                    v = payload
                else:
                    v = ecc.encode(payload)
                    if tap and taps is not None and tap[0] == taps[0]:
                        v ^= tap[1]
                self._store(idx, v, copy)
                return
            old, st = ecc.decode_fast(arrs[0][idx])
            if st == 1:
                res.corrected += 1
            elif st == 2:
                res.uncorrectable += 1
            new = ecc.decode_fast(payload)[0] if self.overlap else payload
            if tap and taps is not None and tap[0] == taps[1]:
                old ^= tap[1]
            m = _BYTE_MASKS[be]
            v = ecc.encode((old & ~m) | (new & m))
            if tap and taps is not None and tap[0] == taps[0]:
                v ^= tap[1]
            self._store(idx, v, copy)
            s[self.busy] = 1
            return
        if be == 0xF:
            self._store(idx, payload & 0xFFFFFFFF, copy)
            return
        if mode == TRIPLE:
            old = majority(arrs[0][idx], arrs[1][idx], arrs[2][idx])
        else:
            old = arrs[0][idx]
        m = _BYTE_MASKS[be]
        self._store(idx, (old & ~m) | (payload & m), copy)
        s[self.busy] = 1

    # -- scrubber -------------------------------------------------------------

    def _push_fix(self, s, idx: int) -> None:
        fq = self.fq
        for v, i in fq:
            if not s[v]:
                s[v] = 1
                s[i] = idx
                return
        # full: drop the oldest entry
        self.drops += 1
        for k in range(len(fq) - 1):
            s[fq[k][1]] = s[fq[k + 1][1]]
        s[fq[-1][1]] = idx

    def _pop_fix(self, s) -> int | None:
        fq = self.fq
        if not s[fq[0][0]]:
            return None
        idx = s[fq[0][1]] % self.words
        for k in range(len(fq) - 1):
            s[fq[k][0]] = s[fq[k + 1][0]]
            s[fq[k][1]] = s[fq[k + 1][1]]
        s[fq[-1][0]] = 0
        s[fq[-1][1]] = 0
        return idx

    def _repair(self, idx: int, res: AccessResult) -> None:
        if self.log is not None:
            self.log.append((self.cycle, idx))
        arr = self.sram.arrays[0]
        c, st = ecc.correct(arr[idx])
        if st == 1:
            res.corrected += 1
            self._store(idx, c)
        elif st == 2:
            res.uncorrectable += 1

    def idle(self, s, enabled: int, res: AccessResult) -> None:
        """One cycle without an external access: release the stall, maybe scrub."""
        s[self.busy] = 0
        if not self.ecc or not enabled:
            return
        idx = self._pop_fix(s)
        if idx is not None:
            self._repair(idx, res)
            return
        cnt = s[self.s_cnt] + 1
        if cnt < self.period:
            s[self.s_cnt] = cnt
            return
        s[self.s_cnt] = 0
        idx = s[self.s_next] % self.words
        s[self.s_next] = (idx + 1) % self.words
        self._repair(idx, res)


# ---------------------------------------------------------------------------
# Standalone bank with cycle semantics.


class MemoryBank:
    """A single bank with its controller, usable outside the SoC.

    ``read``/``write`` model one granted access and advance one cycle;
    ``tick`` advances an idle cycle (the scrubber may run).
    """

    def __init__(self, words: int = 2048, mode: str = ECC, scrub_period: int = 1,
                 overlap: bool = False, scrub_enabled: bool = True):
        self.reg = StateRegistry()
        self.sram = SramBank(words, mode)
        self.ctl = BankCtl(self.reg, "bank", self.sram, overlap, scrub_period)
        self.ctl.declare_ctl(self.reg)
        self.enabled = int(scrub_enabled)
        self.corrections = 0
        self.uncorrectable = 0
        self.cycles = 0

    @property
    def s(self):
        return self.reg.values

    @property
    def busy(self) -> bool:
        return bool(self.s[self.ctl.busy])

    def _account(self, res: AccessResult) -> None:
        self.corrections += res.corrected
        self.uncorrectable += res.uncorrectable
        self.cycles += 1

    def read(self, idx: int) -> tuple[int, ecc.Status]:
        """Returns the decoded (or voted, or raw) word and its decode status.

        Under ``overlap`` the latch holds the stored codeword; this helper
        still decodes it so callers see data.
        """
        self._check(idx)
        res = AccessResult()
        self.ctl.access(self.s, 0, idx, 0, 0, res)
        self._account(res)
        v = self.s[self.ctl.rdata]
        if self.sram.mode == ECC:
            d, st = ecc.decode_fast(v)
            return d, ecc.Status(st)
        return v, ecc.Status.CLEAN

    def write(self, idx: int, data: int, be: int = 0xF) -> None:
        self._check(idx)
        if be == 0:
            raise ValueError("byte enable must be nonzero")
        res = AccessResult()
        payload = ecc.encode(data) if self.ctl.overlap and self.sram.mode == ECC else data
        self.ctl.access(self.s, 1, idx, payload, be, res)
        self._account(res)

    def tick(self, n: int = 1) -> None:
        for _ in range(n):
            res = AccessResult()
            self.ctl.idle(self.s, self.enabled, res)
            self._account(res)

    def _check(self, idx: int) -> None:
        if not 0 <= idx < self.sram.words:
            raise IndexError(f"word index {idx} outside bank")
        if self.busy:
            raise RuntimeError("bank is stalled by a read-modify-write this cycle")

    @property
    def scrub_index(self) -> int:
        return self.s[self.ctl.s_next]

    def stored(self, idx: int, copy: int = 0) -> int:
        return self.sram.arrays[copy][idx]

    def flip(self, idx: int, bit: int, copy: int = 0) -> None:
        self.sram.arrays[copy][idx] ^= 1 << bit


def bank_read(bank: MemoryBank, addr: int):
    return bank.read(addr >> 2)


def bank_write(bank: MemoryBank, addr: int, data: int, byte_enable: int = 0xF) -> None:
    bank.write(addr >> 2, data, byte_enable)


def scrub_step(bank: MemoryBank) -> int:
    """Advance one idle cycle; returns the number of corrections it made."""
    before = bank.corrections
    bank.tick()
    return bank.corrections - before


def monitor_read_fix(bank: MemoryBank, addr: int) -> None:
    """Queue a write-back of ``addr`` as if a monitored read found an error there."""
    bank.ctl._push_fix(bank.s, addr >> 2)
