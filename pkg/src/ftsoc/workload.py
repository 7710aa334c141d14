"""Reference workload and its image file format.

The program prints a greeting over the UART, drives a GPIO pattern, sleeps on
a timer interrupt, runs one iteration of a checksum kernel over xorshift data
in bank 1 (including byte stores, which exercise read-modify-write), prints a
status string, sleeps long enough for the scrubber to sweep a whole bank and
writes ``0x8000_0000 | errors`` to the return-value register before halting.

Image layout (little-endian)::

    b"UCWL" | entry:u32 | nwords:u32 | words:u32[nwords] | crc32:u32
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from . import isa
from . import peripherals as P
from .interconnect import BANK1_BASE, PERIPH_BASE

MAGIC = b"UCWL"

SEED = 0x1234_5678
N_WORDS = 32
PATCH_BYTE = 0x5A
PATCH_OFFSETS = (1, 6, 11, 16)
GREETING = "hello\n"
STATUS_OK = "ok\n"
STATUS_BAD = "no\n"
DELAY = 96
TAIL = 2048  # idle cycles before halt: one full scrub sweep of a bank

# data layout in bank 1 (byte offsets from its base)
TICKS = 0x0
RESULT = 0x4
BUF = 0x40


class ImageError(ValueError):
    pass


def xorshift32(x: int) -> int:
    x ^= (x << 13) & 0xFFFFFFFF
    x ^= x >> 17
    x ^= (x << 5) & 0xFFFFFFFF
    return x


def checksum_oracle(seed: int = SEED, n: int = N_WORDS, patches=PATCH_OFFSETS,
                    patch_byte: int = PATCH_BYTE) -> int:
    """Pure-Python model of the kernel, used to embed the expected value."""
    buf = bytearray()
    x = seed
    for _ in range(n):
        x = xorshift32(x)
        buf += x.to_bytes(4, "little")
    for off in patches:
        buf[off] = patch_byte
    c = 0
    for i in range(n):
        w = int.from_bytes(buf[4 * i:4 * i + 4], "little")
        c = ((c << 5) | (c >> 27)) & 0xFFFFFFFF
        c = (c + w) & 0xFFFFFFFF
        c ^= n - i
    return c


def _pack_string(text: str) -> list[str]:
    data = text.encode("ascii") + b"\0"
    data += b"\0" * (-len(data) % 4)
    return [f".word {int.from_bytes(data[i:i + 4], 'little'):#x}" for i in range(0, len(data), 4)]


def source() -> str:
    expected = checksum_oracle()
    patches = "\n".join(f"    sb r9, {BUF + o}(r11)" for o in PATCH_OFFSETS)
    clears = "\n".join(f"    addi r{i}, r0, 0" for i in range(1, 16))
    # keep r3 (return value) and the registers the ISR relies on across the tail sleep
    early_clears = "\n".join(f"    addi r{i}, r0, 0" for i in range(1, 16) if i not in (3, 11, 12, 14))
    return f"""
.org 0
    j start
.org {isa.IRQ_VECTOR}
isr:
    sw r0, {P.T_CTRL}(r14)
    sw r0, {P.T_PENDING}(r14)
    lw r12, {TICKS}(r11)
    addi r12, r12, 1
    sw r12, {TICKS}(r11)
    mret

start:
    addi r14, r0, {PERIPH_BASE}
    addi r11, r0, {BANK1_BASE}
    addi r1, r0, 1
    sw r1, {P.C_MONCLR}(r14)
    sw r1, {P.C_SCRUB}(r14)
    sw r1, {P.C_SETUP}(r14)

    addi r2, r0, greeting
    jal r15, puts

    li r13, 0xA5A5A5A5
    addi r8, r0, 4
toggle:
    sw r13, {P.G_OUT}(r14)
    xori r13, r13, -1
    addi r8, r8, -1
    bne r8, r0, toggle

    lw r4, {P.T_COUNTER}(r14)
    addi r4, r4, {DELAY}
    sw r4, {P.T_COMPARE}(r14)
    addi r1, r0, 1
    sw r1, {P.T_CTRL}(r14)
    csrw ie, r1
sleep:
    wfi
    lw r5, {TICKS}(r11)
    beq r5, r0, sleep
    csrw ie, r0

    jal r15, kernel
    addi r10, r0, 0
    li r2, {expected:#x}
    beq r1, r2, sum_ok
    addi r10, r10, 1
sum_ok:
    sw r1, {RESULT}(r11)
    lw r5, {TICKS}(r11)
    addi r6, r0, 1
    beq r5, r6, tick_ok
    addi r10, r10, 1
tick_ok:
    sw r1, {P.G_OUT}(r14)
    addi r2, r0, status_ok
    beq r10, r0, report
    addi r2, r0, status_bad
report:
    jal r15, puts
drain:
    lw r3, {P.U_STATUS}(r14)
    bne r3, r0, drain
    li r3, 0x80000000
    or r3, r3, r10
{early_clears}
    lw r4, {P.T_COUNTER}(r14)
    addi r4, r4, {TAIL}
    sw r4, {P.T_COMPARE}(r14)
    addi r4, r0, 1
    sw r4, {P.T_CTRL}(r14)
    csrw ie, r4
    addi r4, r0, 0
    wfi
    csrw ie, r0
    sw r3, {P.C_RETVAL}(r14)
{clears}
    halt

puts:
    lw r3, 0(r2)
    addi r4, r0, 4
putc:
    andi r5, r3, 0xFF
    beq r5, r0, puts_done
tx_wait:
    lw r6, {P.U_STATUS}(r14)
    bne r6, r0, tx_wait
    sw r5, {P.U_TX}(r14)
    srli r3, r3, 8
    addi r4, r4, -1
    bne r4, r0, putc
    addi r2, r2, 4
    j puts
puts_done:
    jalr r0, r15, 0

kernel:
    li r1, {SEED:#x}
    addi r7, r11, {BUF}
    addi r8, r0, {N_WORDS}
gen:
    slli r2, r1, 13
    xor r1, r1, r2
    srli r2, r1, 17
    xor r1, r1, r2
    slli r2, r1, 5
    xor r1, r1, r2
    sw r1, 0(r7)
    addi r7, r7, 4
    addi r8, r8, -1
    bne r8, r0, gen
    addi r9, r0, {PATCH_BYTE}
{patches}
    addi r1, r0, 0
    addi r7, r11, {BUF}
    addi r8, r0, {N_WORDS}
sum:
    lw r2, 0(r7)
    slli r3, r1, 5
    srli r4, r1, 27
    or r1, r3, r4
    add r1, r1, r2
    xor r1, r1, r8
    addi r7, r7, 4
    addi r8, r8, -1
    bne r8, r0, sum
    jalr r0, r15, 0

greeting:
{chr(10).join(_pack_string(GREETING))}
status_ok:
{chr(10).join(_pack_string(STATUS_OK))}
status_bad:
{chr(10).join(_pack_string(STATUS_BAD))}
"""


@dataclass(frozen=True)
class Program:
    words: tuple[int, ...]
    entry: int
    labels: dict
    expected_checksum: int


def build_program() -> Program:
    words, labels = isa.assemble(source())
    return Program(tuple(words), 0, labels, checksum_oracle())


def encode_image(words, entry: int = 0) -> bytes:
    body = MAGIC + struct.pack("<II", entry, len(words)) + struct.pack(f"<{len(words)}I", *words)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_image(blob: bytes) -> tuple[list[int], int]:
    """Validate and unpack an image; returns ``(words, entry)``."""
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise ImageError("not a workload image (bad magic)")
    entry, n = struct.unpack_from("<II", blob, 4)
    if len(blob) != 12 + 4 * n + 4:
        raise ImageError(f"image length {len(blob)} does not match {n} words")
    (crc,) = struct.unpack_from("<I", blob, 12 + 4 * n)
    if zlib.crc32(blob[:12 + 4 * n]) != crc:
        raise ImageError("image checksum mismatch")
    if entry & 3:
        raise ImageError(f"misaligned entry point {entry:#x}")
    return list(struct.unpack_from(f"<{n}I", blob, 12)), entry


def save_image(path, words=None, entry: int = 0) -> Path:
    if words is None:
        prog = build_program()
        words, entry = prog.words, prog.entry
    path = Path(path)
    path.write_bytes(encode_image(words, entry))
    return path


def load_image(path) -> tuple[list[int], int]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"workload image {path} not found")
    try:
        return decode_image(path.read_bytes())
    except ImageError as exc:
        raise ImageError(f"{path}: {exc}") from None
