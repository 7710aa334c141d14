"""Instruction set of the 16-register load/store micro-core, plus a tiny assembler.

Encoding (32 bits)::

    [31:26] opcode  [25:22] rd  [21:18] rs1  [17:14] rs2  [3:0] funct   (R-type)
    [31:26] opcode  [25:22] rd  [21:18] rs1  [17:0]  imm18 (sign-extended)

Stores and branches carry their second source register in the ``rd`` field.
Branch and JAL offsets count words relative to the branching instruction.
"""

from __future__ import annotations

import re

OP_ALU = 0x01
OP_ADDI = 0x02
OP_ANDI = 0x03
OP_ORI = 0x04
OP_XORI = 0x05
OP_SLLI = 0x06
OP_SRLI = 0x07
OP_LUI = 0x08
OP_LW = 0x10
OP_SW = 0x11
OP_SB = 0x12
OP_BEQ = 0x18
OP_BNE = 0x19
OP_BLTU = 0x1A
OP_JAL = 0x1C
OP_JALR = 0x1D
OP_CSRW = 0x20
OP_MRET = 0x21
OP_WFI = 0x22
OP_HALT = 0x23

F_ADD, F_SUB, F_AND, F_OR, F_XOR, F_SLL, F_SRL, F_SLTU = range(8)

CSR_IE = 0
CSR_EPC = 1

IRQ_VECTOR = 0x10

MASK32 = 0xFFFFFFFF
IMM_BITS = 18
IMM_MASK = (1 << IMM_BITS) - 1

_ALU_FUNCT = {"add": F_ADD, "sub": F_SUB, "and": F_AND, "or": F_OR,
              "xor": F_XOR, "sll": F_SLL, "srl": F_SRL, "sltu": F_SLTU}
_IMM_OPS = {"addi": OP_ADDI, "andi": OP_ANDI, "ori": OP_ORI, "xori": OP_XORI,
            "slli": OP_SLLI, "srli": OP_SRLI}
_BRANCH = {"beq": OP_BEQ, "bne": OP_BNE, "bltu": OP_BLTU}
_MEM = {"lw": OP_LW, "sw": OP_SW, "sb": OP_SB}
_CSR = {"ie": CSR_IE, "epc": CSR_EPC}


class AsmError(ValueError):
    pass


def sext18(v: int) -> int:
    v &= IMM_MASK
    return v - (1 << IMM_BITS) if v >> (IMM_BITS - 1) else v


def r_type(funct: int, rd: int, rs1: int, rs2: int) -> int:
    return OP_ALU << 26 | rd << 22 | rs1 << 18 | rs2 << 14 | funct


def i_type(op: int, rd: int, rs1: int, imm: int) -> int:
    if not -(1 << (IMM_BITS - 1)) <= imm < (1 << IMM_BITS):
        raise AsmError(f"immediate {imm} out of range")
    return op << 26 | rd << 22 | rs1 << 18 | (imm & IMM_MASK)


def _reg(tok: str) -> int:
    m = re.fullmatch(r"r(\d+)", tok.strip())
    if not m or int(m.group(1)) > 15:
        raise AsmError(f"bad register {tok!r}")
    return int(m.group(1))


def assemble(source: str, symbols: dict[str, int] | None = None, origin: int = 0) -> tuple[list[int], dict[str, int]]:
    """Two-pass assembler. Returns ``(words, labels)``; labels are byte addresses.

    Directives: ``.org ADDR`` pads with zero words, ``.word VALUE``.
    Pseudo-ops: ``li rd, VALUE`` (always two words), ``j LABEL``, ``nop``.
    """
    consts = dict(symbols or {})
    lines = []
    for raw in source.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)

    def size(mn: str) -> int:
        return 2 if mn == "li" else 1

    labels: dict[str, int] = {}
    pc = origin
    for line in lines:
        while ":" in line:
            lab, line = line.split(":", 1)
            labels[lab.strip()] = pc
            line = line.strip()
        if not line:
            continue
        mn, *rest = line.split(None, 1)
        if mn == ".org":
            pc = _eval(rest[0], consts)
        elif mn == ".word":
            pc += 4
        else:
            pc += 4 * size(mn)

    env = {**consts, **labels}
    words: dict[int, int] = {}
    pc = origin
    for line in lines:
        while ":" in line:
            _, line = line.split(":", 1)
            line = line.strip()
        if not line:
            continue
        mn, *rest = line.split(None, 1)
        args = [a.strip() for a in rest[0].split(",")] if rest else []
        if mn == ".org":
            pc = _eval(args[0], env)
            continue
        for w in _encode(mn, args, pc, env):
            words[pc] = w & MASK32
            pc += 4
    top = max(words) + 4 if words else origin
    image = [words.get(a, 0) for a in range(origin, top, 4)]
    return image, labels


def _eval(expr: str, env: dict[str, int]) -> int:
    try:
        return int(eval(expr, {"__builtins__": {}}, dict(env)))
    except Exception as exc:  # noqa: BLE001
        raise AsmError(f"cannot evaluate {expr!r}: {exc}") from None


def _mem_operand(tok: str, env) -> tuple[int, int]:
    m = re.fullmatch(r"(.*)\((r\d+)\)", tok.replace(" ", ""))
    if not m:
        raise AsmError(f"bad memory operand {tok!r}")
    off = _eval(m.group(1), env) if m.group(1) else 0
    return off, _reg(m.group(2))


def _encode(mn: str, a: list[str], pc: int, env) -> list[int]:
    if mn == ".word":
        return [_eval(a[0], env)]
    if mn == "nop":
        return [i_type(OP_ADDI, 0, 0, 0)]
    if mn in _ALU_FUNCT:
        return [r_type(_ALU_FUNCT[mn], _reg(a[0]), _reg(a[1]), _reg(a[2]))]
    if mn in _IMM_OPS:
        return [i_type(_IMM_OPS[mn], _reg(a[0]), _reg(a[1]), _eval(a[2], env))]
    if mn == "lui":
        return [OP_LUI << 26 | _reg(a[0]) << 22 | (_eval(a[1], env) & IMM_MASK)]
    if mn == "li":
        v = _eval(a[1], env) & MASK32
        rd = _reg(a[0])
        return [OP_LUI << 26 | rd << 22 | (v >> 14),
                i_type(OP_ORI, rd, rd, v & 0x3FFF)]
    if mn in _MEM:
        off, base = _mem_operand(a[1], env)
        return [i_type(_MEM[mn], _reg(a[0]), base, off)]
    if mn in _BRANCH:
        tgt = _eval(a[2], env)
        return [i_type(_BRANCH[mn], _reg(a[0]), _reg(a[1]), (tgt - pc) // 4)]
    if mn == "jal":
        tgt = _eval(a[1], env)
        return [i_type(OP_JAL, _reg(a[0]), 0, (tgt - pc) // 4)]
    if mn == "j":
        tgt = _eval(a[0], env)
        return [i_type(OP_JAL, 0, 0, (tgt - pc) // 4)]
    if mn == "jalr":
        return [i_type(OP_JALR, _reg(a[0]), _reg(a[1]), _eval(a[2], env) if len(a) > 2 else 0)]
    if mn == "csrw":
        return [i_type(OP_CSRW, 0, _reg(a[1]), _CSR[a[0]])]
    if mn == "mret":
        return [OP_MRET << 26]
    if mn == "wfi":
        return [OP_WFI << 26]
    if mn == "halt":
        return [OP_HALT << 26]
    raise AsmError(f"unknown mnemonic {mn!r}")
