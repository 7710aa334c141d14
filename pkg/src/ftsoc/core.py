"""Micro-core execution model.

The core is a three-phase FSM (fetch, execute, memory) with one outstanding
transaction per port.  Its architectural state lives in a registry slice
starting at a base index so that three lockstep replicas are just three bases.

``core_eval`` is split from the commit so that a bus grant, which depends on
the voted requests of all replicas, can be applied afterwards.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, field

from . import isa
from .isa import MASK32
from .redundancy import majority

PC = 0
# general registers r1..r15 live at offsets 1..15
PHASE = 16
IR = 17
IE = 18
EPC = 19
EXC = 20
SLEEP = 21
HALT = 22
NFIELDS = 23

FETCH, EXEC, MEM, DREQ = 0, 1, 2, 3

FIELD_SPECS = (
    [("pc", 32)]
    + [(f"r{i}", 32) for i in range(1, 16)]
    + [("phase", 2), ("ir", 32), ("ie", 1), ("epc", 32), ("exc", 1), ("sleep", 1), ("halt", 1)]
)

NOP: tuple = ()

# Read-port mux tree: node j covers registers [lo, hi).
RF_NODES = tuple(
    [(2 * j, 2 * j + 2) for j in range(8)]
    + [(4 * j, 4 * j + 4) for j in range(4)]
    + [(0, 8), (8, 16), (0, 16)]
)

DATAPATH_NETS = (
    ("imm", 32), ("alu_add", 32), ("alu_sub", 32), ("alu_and", 32), ("alu_or", 32),
    ("alu_xor", 32), ("alu_sll", 32), ("alu_srl", 32), ("alu_cmp", 1), ("alu_out", 32),
    ("agu", 32), ("next_pc", 32), ("ldata", 32), ("sdata", 32), ("be", 4),
)


@dataclass
class CoreTaps:
    """Net ids of one core replica's combinational taps (see ``soc.TapTable``)."""

    rf1: int = -1  # first of 15 consecutive node ids
    rf2: int = -1
    imm: int = -1
    alu_add: int = -1
    alu_sub: int = -1
    alu_and: int = -1
    alu_or: int = -1
    alu_xor: int = -1
    alu_sll: int = -1
    alu_srl: int = -1
    alu_cmp: int = -1
    alu_out: int = -1
    agu: int = -1
    next_pc: int = -1
    ldata: int = -1
    sdata: int = -1
    be: int = -1


_NO_TAPS = CoreTaps()


def _rf_tap(tap, base, r, v):
    j = tap[0] - base
    if 0 <= j < 15:
        lo, hi = RF_NODES[j]
        if lo <= r < hi:
            return v ^ tap[1]
    return v


def busy(s, b) -> int:
    return 0 if (s[b + SLEEP] or s[b + HALT] or s[b + EXC]) else 1


def core_eval(s, b, i_valid, i_data, i_err, d_valid, d_data, d_err, irq, tap=None, t: CoreTaps = _NO_TAPS):
    """Evaluate one cycle of the replica at base ``b``.

    Returns ``(iaddr, dreq, w_ok, w_stall)``: the fetch address (or None), the
    data request ``(write, addr, wdata, be)`` (or None), and the field updates
    to apply when the needed grant is / is not given.  Updates are
    ``(offset, value)`` pairs relative to ``b``.
    """
    if s[b + EXC] or s[b + HALT]:
        return None, None, NOP, NOP
    ph = s[b + PHASE]
    if ph == FETCH:
        if s[b + SLEEP]:
            return None, None, (((SLEEP, 0),) if irq else NOP), NOP
        pc = s[b]
        if irq and s[b + IE]:
            return None, None, ((EPC, pc), (PC, isa.IRQ_VECTOR), (IE, 0)), NOP
        if pc & 3:
            return None, None, ((EXC, 1),), NOP
        return pc, None, ((PHASE, EXEC),), NOP
    if ph == EXEC:
        if not i_valid:
            return None, None, NOP, NOP
        if i_err:
            return None, None, ((EXC, 1),), NOP
        return _execute(s, b, i_data, tap, t)
    if ph == DREQ:
        return _mem_request(s, b, s[b + IR], tap, t, reissue=True)
    # MEM: wait for the data response
    if not d_valid:
        return None, None, NOP, NOP
    if d_err:
        return None, None, ((EXC, 1),), NOP
    instr = s[b + IR]
    pc = s[b]
    npc = (pc + 4) & MASK32
    if tap:
        npc = _tap1(tap, t.next_pc, npc)
    if instr >> 26 == isa.OP_LW:
        rd = instr >> 22 & 15
        v = d_data
        if tap:
            v = _tap1(tap, t.ldata, v)
        if rd:
            return None, None, ((rd, v), (PC, npc), (PHASE, FETCH)), NOP
    return None, None, ((PC, npc), (PHASE, FETCH)), NOP


def _tap1(tap, net, v):
    return v ^ tap[1] if tap[0] == net else v


def _read(s, b, r, tap, base):
    v = s[b + r] if r else 0
    if tap:
        v = _rf_tap(tap, base, r, v)
    return v


def _mem_request(s, b, instr, tap, t, reissue=False):
    op = instr >> 26
    rs1 = instr >> 18 & 15
    imm = isa.sext18(instr)
    a = _read(s, b, rs1, tap, t.rf1)
    if tap:
        imm = _tap1(tap, t.imm, imm & MASK32)
    addr = (a + imm) & MASK32
    if tap:
        addr = _tap1(tap, t.agu, addr)
    keep = NOP if reissue else ((IR, instr),)
    if op == isa.OP_LW:
        if addr & 3:
            return None, None, ((EXC, 1),), NOP
        return None, (0, addr, 0, 0xF), keep + ((PHASE, MEM),), keep + ((PHASE, DREQ),)
    v = _read(s, b, instr >> 22 & 15, tap, t.rf2)
    if op == isa.OP_SW:
        if addr & 3:
            return None, None, ((EXC, 1),), NOP
        wdata, be = v, 0xF
    else:
        sh = addr & 3
        wdata, be = (v & 0xFF) << (8 * sh), 1 << sh
        addr &= ~3 & MASK32
    if tap:
        wdata = _tap1(tap, t.sdata, wdata)
        be = _tap1(tap, t.be, be)
    return None, (1, addr, wdata, be), keep + ((PHASE, MEM),), keep + ((PHASE, DREQ),)


def _execute(s, b, instr, tap, t):
    op = instr >> 26
    if op in (isa.OP_LW, isa.OP_SW, isa.OP_SB):
        return _mem_request(s, b, instr, tap, t)
    pc = s[b]
    rd = instr >> 22 & 15
    rs1 = instr >> 18 & 15
    npc = (pc + 4) & MASK32
    res = None
    if op == isa.OP_ALU:
        fn = instr & 0xF
        a = _read(s, b, rs1, tap, t.rf1)
        c = _read(s, b, instr >> 14 & 15, tap, t.rf2)
        if fn == isa.F_ADD:
            res = (a + c) & MASK32
            if tap:
                res = _tap1(tap, t.alu_add, res)
        elif fn == isa.F_SUB:
            res = (a - c) & MASK32
            if tap:
                res = _tap1(tap, t.alu_sub, res)
        elif fn == isa.F_AND:
            res = a & c
            if tap:
                res = _tap1(tap, t.alu_and, res)
        elif fn == isa.F_OR:
            res = a | c
            if tap:
                res = _tap1(tap, t.alu_or, res)
        elif fn == isa.F_XOR:
            res = a ^ c
            if tap:
                res = _tap1(tap, t.alu_xor, res)
        elif fn == isa.F_SLL:
            res = (a << (c & 31)) & MASK32
            if tap:
                res = _tap1(tap, t.alu_sll, res)
        elif fn == isa.F_SRL:
            res = a >> (c & 31)
            if tap:
                res = _tap1(tap, t.alu_srl, res)
        elif fn == isa.F_SLTU:
            res = 1 if a < c else 0
            if tap:
                res = _tap1(tap, t.alu_cmp, res)
        else:
            return None, None, ((EXC, 1),), NOP
    elif isa.OP_ADDI <= op <= isa.OP_SRLI:
        a = _read(s, b, rs1, tap, t.rf1)
        imm = isa.sext18(instr) & MASK32
        if tap:
            imm = _tap1(tap, t.imm, imm)
        if op == isa.OP_ADDI:
            res = (a + imm) & MASK32
            if tap:
                res = _tap1(tap, t.alu_add, res)
        elif op == isa.OP_ANDI:
            res = a & imm
            if tap:
                res = _tap1(tap, t.alu_and, res)
        elif op == isa.OP_ORI:
            res = a | imm
            if tap:
                res = _tap1(tap, t.alu_or, res)
        elif op == isa.OP_XORI:
            res = a ^ imm
            if tap:
                res = _tap1(tap, t.alu_xor, res)
        elif op == isa.OP_SLLI:
            res = (a << (imm & 31)) & MASK32
            if tap:
                res = _tap1(tap, t.alu_sll, res)
        else:
            res = a >> (imm & 31)
            if tap:
                res = _tap1(tap, t.alu_srl, res)
    elif op == isa.OP_LUI:
        res = (instr & isa.IMM_MASK) << 14 & MASK32
        if tap:
            res = _tap1(tap, t.imm, res)
    elif isa.OP_BEQ <= op <= isa.OP_BLTU:
        a = _read(s, b, rs1, tap, t.rf1)
        c = _read(s, b, rd, tap, t.rf2)
        if op == isa.OP_BEQ:
            taken = 1 if c == a else 0
        elif op == isa.OP_BNE:
            taken = 1 if c != a else 0
        else:
            taken = 1 if c < a else 0
        if tap:
            taken = _tap1(tap, t.alu_cmp, taken)
        if taken:
            off = isa.sext18(instr) * 4 & MASK32
            if tap:
                off = _tap1(tap, t.imm, off)
            npc = (pc + off) & MASK32
        rd = 0
    elif op == isa.OP_JAL:
        off = isa.sext18(instr) * 4 & MASK32
        if tap:
            off = _tap1(tap, t.imm, off)
        res = npc
        npc = (pc + off) & MASK32
    elif op == isa.OP_JALR:
        a = _read(s, b, rs1, tap, t.rf1)
        imm = isa.sext18(instr) & MASK32
        if tap:
            imm = _tap1(tap, t.imm, imm)
        res = npc
        npc = (a + imm) & MASK32 & ~3
    elif op == isa.OP_CSRW:
        a = _read(s, b, rs1, tap, t.rf1)
        csr = instr & isa.IMM_MASK
        if tap:
            npc = _tap1(tap, t.next_pc, npc)
        if csr == isa.CSR_IE:
            return None, None, ((IE, a & 1), (PC, npc), (PHASE, FETCH)), NOP
        if csr == isa.CSR_EPC:
            return None, None, ((EPC, a), (PC, npc), (PHASE, FETCH)), NOP
        return None, None, ((EXC, 1),), NOP
    elif op == isa.OP_MRET:
        npc = s[b + EPC]
        if tap:
            npc = _tap1(tap, t.next_pc, npc)
        return None, None, ((PC, npc), (IE, 1), (PHASE, FETCH)), NOP
    elif op == isa.OP_WFI:
        if tap:
            npc = _tap1(tap, t.next_pc, npc)
        return None, None, ((PC, npc), (SLEEP, 1), (PHASE, FETCH)), NOP
    elif op == isa.OP_HALT:
        return None, None, ((HALT, 1), (PHASE, FETCH)), NOP
    else:
        return None, None, ((EXC, 1),), NOP
    if tap:
        npc = _tap1(tap, t.next_pc, npc)
    if res is not None and rd:
        if tap:
            res = _tap1(tap, t.alu_out, res)
        return None, None, ((rd, res), (PC, npc), (PHASE, FETCH)), NOP
    return None, None, ((PC, npc), (PHASE, FETCH)), NOP


def commit(s, b, updates) -> None:
    for off, v in updates:
        s[b + off] = v


# --------------------------------------------------------------------------
# Value-type API over a standalone core, used by tests and the notebooks.


@dataclass
class CoreState:
    pc: int = 0
    regs: list[int] = field(default_factory=lambda: [0] * 16)
    phase: int = FETCH
    ir: int = 0
    ie: int = 0
    epc: int = 0
    exception_flag: int = 0
    sleep: int = 0
    halt: int = 0

    @property
    def busy(self) -> bool:
        return not (self.sleep or self.halt or self.exception_flag)

    @property
    def pipeline_latch(self) -> int:
        return self.ir

    def to_list(self) -> list[int]:
        return [self.pc] + self.regs[1:16] + [self.phase, self.ir, self.ie, self.epc,
                                              self.exception_flag, self.sleep, self.halt]

    @classmethod
    def from_list(cls, v, b: int = 0) -> "CoreState":
        return cls(pc=v[b], regs=[0] + list(v[b + 1:b + 16]), phase=v[b + PHASE], ir=v[b + IR],
                   ie=v[b + IE], epc=v[b + EPC], exception_flag=v[b + EXC], sleep=v[b + SLEEP],
                   halt=v[b + HALT])


@dataclass(frozen=True)
class BusRequest:
    valid: int = 0
    write: int = 0
    addr: int = 0
    wdata: int = 0
    byte_enable: int = 0


@dataclass(frozen=True)
class Response:
    valid: int = 0
    data: int = 0
    err: int = 0


def core_step(state: CoreState, i_rsp: Response = Response(), d_rsp: Response = Response(),
              irq: int = 0, i_gnt: bool = True, d_gnt: bool = True):
    """One cycle of a standalone core.

    Returns ``(new_state, fetch_request, data_request, status)`` where status
    is a dict with the ``busy`` and ``exception`` pins after the cycle.
    """
    s = state.to_list()
    iaddr, dreq, w_ok, w_stall = core_eval(s, 0, i_rsp.valid, i_rsp.data, i_rsp.err,
                                           d_rsp.valid, d_rsp.data, d_rsp.err, irq)
    granted = (iaddr is None or i_gnt) and (dreq is None or d_gnt)
    commit(s, 0, w_ok if granted else w_stall)
    new = CoreState.from_list(s)
    ireq = BusRequest(1, 0, iaddr, 0, 0xF) if iaddr is not None else BusRequest()
    dr = BusRequest(1, dreq[0], dreq[1], dreq[2], dreq[3]) if dreq else BusRequest()
    return new, ireq, dr, {"busy": int(new.busy), "exception": new.exception_flag}


# --------------------------------------------------------------------------
# Standalone triple-core lockstep wrapper.


@dataclass
class TclsWrapper:
    replicas: list  # three CoreState
    resync_pending: bool = False

    @classmethod
    def reset(cls, pc: int = 0) -> "TclsWrapper":
        return cls([CoreState(pc=pc) for _ in range(3)])


def _vote_req(a: BusRequest, b: BusRequest, c: BusRequest) -> BusRequest:
    return BusRequest(*(majority(x, y, z) for x, y, z in
                        zip(astuple(a), astuple(b), astuple(c))))


def tcls_step(w: TclsWrapper, i_rsp: Response = Response(), d_rsp: Response = Response(),
              irq: int = 0, i_gnt: bool = True, d_gnt: bool = True):
    """Step all three replicas with the same inputs and vote their requests.

    Returns ``(wrapper, fetch_request, data_request, fault_flag)``; the flag is
    raised when any replica's outputs disagree, and marks a resync as pending.
    """
    outs = []
    reps = []
    for st in w.replicas:
        new, ir, dr, status = core_step(st, i_rsp, d_rsp, irq, i_gnt, d_gnt)
        reps.append(new)
        outs.append((ir, dr, status["busy"]))
    flag = not (outs[0] == outs[1] == outs[2])
    ireq = _vote_req(*(o[0] for o in outs))
    dreq = _vote_req(*(o[1] for o in outs))
    return TclsWrapper(reps, w.resync_pending or flag), ireq, dreq, flag


def resync(w: TclsWrapper) -> TclsWrapper:
    """Overwrite every replica with the field-wise majority of all three."""
    lists = [r.to_list() for r in w.replicas]
    voted = [majority(x, y, z) for x, y, z in zip(*lists)]
    return TclsWrapper([CoreState.from_list(voted) for _ in range(3)], False)
