import pytest
from hypothesis import given, settings, strategies as st

from ftsoc import ecc
from ftsoc.ecc import Status
from ftsoc.memory import ECC, RAW, TRIPLE, MemoryBank, SramBank, bank_read, bank_write, byte_mask, \
    monitor_read_fix, scrub_step


def test_roundtrip():
    b = MemoryBank(64)
    bank_write(b, 0x10, 0xDEADBEEF)
    assert bank_read(b, 0x10) == (0xDEADBEEF, Status.CLEAN)
    assert b.stored(4) == ecc.encode(0xDEADBEEF)


def test_single_and_double_flip_on_read():
    b = MemoryBank(64, scrub_enabled=False)
    b.write(3, 0xDEADBEEF)
    b.flip(3, 17)
    assert b.read(3) == (0xDEADBEEF, Status.CORRECTED)
    b.write(4, 0xDEADBEEF)
    b.flip(4, 1)
    b.flip(4, 35)
    assert b.read(4)[1] is Status.UNCORRECTABLE
    assert b.uncorrectable == 1


def test_partial_write_merges_and_stalls():
    b = MemoryBank(64)
    b.write(0, 0x11223344)
    b.write(0, 0x000000AA, be=0b0001)
    assert b.busy
    with pytest.raises(RuntimeError):
        b.read(0)
    b.tick()
    assert b.read(0) == (0x112233AA, Status.CLEAN)


def test_partial_write_repairs_single_error():
    b = MemoryBank(64, scrub_enabled=False)
    b.write(2, 0x11223344)
    b.flip(2, 30)
    b.write(2, 0xBB00, be=0b0010)
    b.tick()
    assert ecc.syndrome(b.stored(2)) == 0
    assert b.read(2) == (0x1122BB44, Status.CLEAN)
    assert b.corrections == 1


def test_zero_byte_enable_rejected():
    with pytest.raises(ValueError):
        MemoryBank(8).write(0, 1, be=0)


def test_clean_sweep_wraps():
    b = MemoryBank(32)
    assert sum(scrub_step(b) for _ in range(32)) == 0
    assert b.scrub_index == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 127), st.integers(0, 38), st.integers(1, 4))
def test_scrubber_fixes_any_single_error(idx, bit, period):
    b = MemoryBank(128, scrub_period=period)
    b.flip(idx, bit)
    b.tick(period * 128)
    assert all(ecc.syndrome(b.stored(i)) == 0 for i in range(128))
    assert b.corrections == 1


def test_scrubber_starves_under_traffic():
    b = MemoryBank(16)
    b.flip(0, 3)
    for _ in range(100):
        b.read(5)
    assert b.scrub_index == 0
    assert ecc.syndrome(b.stored(0)) != 0


def test_read_fix_writes_back_on_idle():
    b = MemoryBank(256, scrub_enabled=True)
    b.write(200, 7)
    b.flip(200, 0)
    b.read(200)
    assert ecc.syndrome(b.stored(200)) != 0
    b.tick()  # fix-up queue beats the sweep
    assert ecc.syndrome(b.stored(200)) == 0


def test_clean_read_queues_nothing():
    b = MemoryBank(16)
    b.read(1)
    s = b.s
    assert all(s[v] == 0 for v, _ in b.ctl.fq)


def test_two_fixups_fifo():
    b = MemoryBank(256)
    for i in (100, 150):
        b.flip(i, 2)
    b.read(100)
    b.read(150)
    b.tick()
    assert ecc.syndrome(b.stored(100)) == 0 and ecc.syndrome(b.stored(150)) != 0
    b.tick()
    assert ecc.syndrome(b.stored(150)) == 0
    monitor_read_fix(b, 4 * 7)
    assert b.s[b.ctl.fq[0][1]] == 7


def test_raw_and_triple_modes():
    r = MemoryBank(8, mode=RAW)
    r.write(1, 5)
    r.flip(1, 0)
    assert r.read(1) == (4, Status.CLEAN)
    t = MemoryBank(8, mode=TRIPLE)
    t.write(1, 5)
    t.flip(1, 0, copy=2)
    assert t.read(1) == (5, Status.CLEAN)
    assert t.stored(1, 2) == 4  # the flip persists in the replica array


def test_dump_format():
    s = SramBank(4, ECC)
    s.load([0xDEADBEEF])
    s.arrays[0][1] ^= 1
    lines = s.dump()
    assert lines[0] == f"00000000: {ecc.encode(0xDEADBEEF):010x} 00"
    assert lines[1].startswith("00000004: ") and lines[1].endswith(f"{ecc.COLUMNS[0]:02x}")


def test_byte_mask():
    assert byte_mask(0b0101) == 0x00FF00FF
