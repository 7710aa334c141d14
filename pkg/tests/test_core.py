import pytest

from ftsoc import core as C
from ftsoc import isa
from ftsoc.core import CoreState, Response, TclsWrapper, core_step, resync, tcls_step


def run(words, cycles=200, state=None, mem=None):
    """Tiny single-cycle memory harness around the standalone core."""
    mem = dict(mem or {})
    for i, w in enumerate(words):
        mem[4 * i] = w
    st = state or CoreState()
    ir = dr = Response()
    for _ in range(cycles):
        st, ireq, dreq, status = core_step(st, ir, dr)
        ir = Response(1, mem.get(ireq.addr, 0)) if ireq.valid else Response()
        if dreq.valid:
            if dreq.write:
                m = sum(0xFF << 8 * i for i in range(4) if dreq.byte_enable >> i & 1)
                mem[dreq.addr] = (mem.get(dreq.addr, 0) & ~m) | (dreq.wdata & m)
                dr = Response(1, 0)
            else:
                dr = Response(1, mem.get(dreq.addr, 0))
        else:
            dr = Response()
        if st.halt or st.exception_flag:
            break
    return st, mem


def asm(src):
    return isa.assemble(src)[0]


def test_addi_from_reset():
    st, _ = run(asm("addi r1, r0, 5\nhalt"))
    assert st.regs[1] == 5 and st.halt and not st.exception_flag


def test_illegal_opcode_traps():
    st, _ = run([0xFFFFFFFF])
    assert st.exception_flag == 1
    assert not st.busy


def test_load_store_and_branches():
    src = """
        li r1, 0xDEADBEEF
        addi r2, r0, 0x100
        sw r1, 0(r2)
        addi r3, r0, 0x7F
        sb r3, 1(r2)
        lw r4, 0(r2)
        addi r5, r0, 3
    loop:
        addi r5, r5, -1
        bne r5, r0, loop
        jal r6, sub
        halt
    sub:
        addi r7, r0, 9
        jalr r0, r6, 0
    """
    st, mem = run(asm(src), 400)
    assert st.halt
    assert mem[0x100] == 0xDEAD7FEF
    assert st.regs[4] == 0xDEAD7FEF
    assert st.regs[5] == 0 and st.regs[7] == 9


def test_alu_ops():
    src = """
        li r1, 0xF0F0F0F0
        li r2, 0x0FF00FF0
        add r3, r1, r2
        sub r4, r1, r2
        and r5, r1, r2
        or r6, r1, r2
        xor r7, r1, r2
        slli r8, r1, 4
        srli r9, r1, 4
        bltu r2, r1, yes
        halt
    yes:
        addi r10, r0, 1
        halt
    """
    a, b = 0xF0F0F0F0, 0x0FF00FF0
    st, _ = run(asm(src), 400)
    m = 0xFFFFFFFF
    assert st.regs[3:10] == [(a + b) & m, (a - b) & m, a & b, a | b, a ^ b, (a << 4) & m, a >> 4]
    assert st.regs[10] == 1


def test_sext18():
    assert isa.sext18(0x3FFFF) == -1
    assert isa.sext18(5) == 5
    with pytest.raises(isa.AsmError):
        isa.i_type(isa.OP_ADDI, 1, 0, 1 << 20)


def test_state_list_roundtrip():
    st = CoreState(pc=8, ir=3, ie=1, epc=4, sleep=1)
    st.regs[5] = 77
    assert CoreState.from_list(st.to_list()) == st
    assert len(st.to_list()) == C.NFIELDS


def _tcls_run(w, words, cycles):
    ir = dr = Response()
    flags = []
    for _ in range(cycles):
        w, ireq, dreq, flag = tcls_step(w, ir, dr)
        flags.append(flag)
        ir = Response(1, words[ireq.addr // 4] if ireq.addr // 4 < len(words) else 0) if ireq.valid else Response()
        dr = Response(1, 0) if dreq.valid else Response()
    return w, flags


def test_tcls_fault_free_and_flip():
    words = asm("addi r1, r0, 1\naddi r2, r1, 1\naddi r3, r2, 1\nhalt")
    w, flags = _tcls_run(TclsWrapper.reset(), words, 12)
    assert not any(flags)
    assert all(r == w.replicas[0] for r in w.replicas)

    w = TclsWrapper.reset()
    w.replicas[1].pc ^= 4  # replica 1 fetches from a different address
    w, ireq, _, flag = tcls_step(w)
    assert flag and ireq.addr == 0 and w.resync_pending


def test_tcls_double_fault_defeats_vote():
    w = TclsWrapper.reset()
    w.replicas[0].pc ^= 8
    w.replicas[1].pc ^= 8
    w, ireq, _, flag = tcls_step(w)
    assert ireq.addr == 8


def test_resync_restores_majority():
    import numpy as np
    rng = np.random.default_rng(5)
    base = CoreState(pc=12, regs=[0] + [int(x) for x in rng.integers(0, 2**32, 15)])
    bad = base.to_list()
    # corrupt 100 bits spread across the replica
    for _ in range(100):
        f = int(rng.integers(1, 16))
        bad[f] ^= 1 << int(rng.integers(0, 32))
    w = TclsWrapper([CoreState.from_list(base.to_list()), CoreState.from_list(bad),
                     CoreState.from_list(base.to_list())], True)
    w = resync(w)
    assert all(r == base for r in w.replicas) and not w.resync_pending
    # nothing to fix: unchanged
    same = TclsWrapper([CoreState.from_list(base.to_list()) for _ in range(3)], True)
    assert resync(same).replicas[0] == base
