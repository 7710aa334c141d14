from ftsoc.interconnect import BANK0, BANK1, ERR, PERIPH, RouteState, arbitrate, audit, decode_addr, \
    route_cycle, set_overlap_mode


def test_decode():
    assert decode_addr(0x0) == (BANK0, 0)
    assert decode_addr(0x1FFC) == (BANK0, 0x7FF)
    assert decode_addr(0x2004) == (BANK1, 1)
    assert decode_addr(0x10104) == (PERIPH, 0x104)
    assert decode_addr(0x4000)[0] == ERR
    assert decode_addr(0x20000)[0] == ERR


def test_uncontended_grant_and_response_next_cycle():
    st = RouteState()
    st, grants, deliveries = route_cycle(st, [0x100, None])
    assert grants == [True, False] and deliveries == [None, None]
    st, grants, deliveries = route_cycle(st, [None, None])
    assert deliveries == [BANK0, None]


def test_contention_round_robin():
    st = RouteState()
    st, g1, _ = route_cycle(st, [0x0, 0x4])
    assert g1 == [True, False]
    st, g2, _ = route_cycle(st, [0x8, 0x4])
    assert g2 == [False, True]  # stalled port wins next cycle


def test_different_subordinates_both_granted():
    last = [1, 1, 1, 0]
    assert arbitrate(BANK0, BANK1, last, (True,) * 4) == (True, True)
    assert arbitrate(BANK0, BANK1, last, (False, True, True, True)) == (False, True)


def test_wiring():
    c2 = set_overlap_mode("cfg2")
    assert c2.codec_site == "bank" and c2.voted_payload_bits == 32
    assert c2.unprotected()
    c3 = set_overlap_mode("cfg3")
    assert c3.codec_site == "replica" and c3.voted_payload_bits == 39
    assert c3.unprotected() == []
    assert c3.reachable("core.r0", "sram") and c3.reachable("sram", "core.r2")
    assert audit("cfg4")["unprotected_segments"] == 0
    assert audit("cfg4")["reencode_sites"] == 0
