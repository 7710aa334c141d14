import pytest

from ftsoc import peripherals as P
from ftsoc.peripherals import Peripherals, decode_uart, read_pin_trace, write_pin_trace


def test_timer_irq_at_compare():
    p = Peripherals()
    p.write(P.T_COMPARE, 100)
    p.write(P.T_CTRL, 1)
    pend = []
    while not p.pins().irq:
        pend.append(p.s[p.p.counter])
        p.step()
    # pending rises on the cycle the counter equals the compare value
    assert p.s[p.p.counter] == 101 and pend[-1] == 100


def test_uart_frame():
    p = Peripherals(uart_divider=4)
    trace = []
    p.write(P.U_TX, 0x41)
    trace.append(p.pins().uart_tx)
    for _ in range(60):
        trace.append(p.step()[0].uart_tx)
    # start bit, LSB first, stop bit
    bits = [trace[2 + 4 * k] for k in range(10)]
    assert bits == [0] + [(0x41 >> k) & 1 for k in range(8)] + [1]
    assert decode_uart(trace, 4) == b"A"


def test_uart_busy_and_status():
    p = Peripherals()
    p.write(P.U_TX, 0x30)
    assert p.read(P.U_STATUS) == 1


def test_gpio_byte_enable():
    p = Peripherals()
    p.write(P.G_OUT, 0x11223344)
    p.write(P.G_OUT, 0xAA00, be=0b0010)
    assert p.pins().gpio == 0x1122AA44


def test_invalid_offset_errors():
    p = Peripherals()
    assert p.write(0x50, 1) == 1
    assert p.write(P.MON_BASE, 1) == 1  # counters are read-only


def test_tmr_replica_flip_counts_once():
    p = Peripherals(tmr=True)
    p.write(P.G_OUT, 0x5)
    g = p.group
    idx = p.p.gpio + g.n  # replica 1 of gpio
    p.s[idx] ^= 1 << 3
    pins, _ = p.step()
    assert pins.gpio == 0x5
    p.step()
    assert p.monitor()["periph"] == 1
    assert p.s[idx] == 0x5


def test_monitor_clear_and_readout():
    p = Peripherals()
    assert p.monitor() == {n: 0 for n in P.MON_SOURCES}
    p.step(extra_flags=(0, 1, 0, 0, 0))
    p.step()
    assert p.read(P.MON_BASE + 4) == 1
    p.write(P.C_MONCLR, 1)
    assert p.monitor()["ecc_corr"] == 0


def test_pin_trace_roundtrip(tmp_path):
    rows = [(0, 1, 0xA5A5A5A5, 1, 0), (1, 0, 0x5A5A5A5A, 1, 0)]
    f = tmp_path / "t.csv"
    write_pin_trace(f, rows)
    assert f.read_text().splitlines()[0] == "cycle,uart_tx,gpio_hex,busy,exception"
    assert read_pin_trace(f) == rows


def test_framing_error():
    trace = [1] * 5 + [0] * 200
    with pytest.raises(ValueError):
        decode_uart(trace, 4)
