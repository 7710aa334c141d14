"""Bus fabric: address decoding, round-robin arbitration and wiring audit.

Two managers (instruction port 0, data port 1) reach four subordinates.  A
granted request is answered from the subordinate's read latch one cycle later,
so each manager has at most one transaction in flight.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .config import SocConfig

BANK0, BANK1, PERIPH, ERR = 0, 1, 2, 3
SUBORDINATES = ("bank0", "bank1", "periph", "err")

BANK0_BASE = 0x0000_0000
BANK1_BASE = 0x0000_2000
PERIPH_BASE = 0x0001_0000
PERIPH_SIZE = 0x1000

I_PORT, D_PORT = 0, 1


def decode_addr(addr: int, bank_words: int = 2048) -> tuple[int, int]:
    """Map a byte address to ``(subordinate, local index or offset)``."""
    span = min(bank_words * 4, BANK1_BASE)
    if addr < span:
        return BANK0, addr >> 2
    if BANK1_BASE <= addr < BANK1_BASE + span:
        return BANK1, (addr - BANK1_BASE) >> 2
    if PERIPH_BASE <= addr < PERIPH_BASE + PERIPH_SIZE:
        return PERIPH, addr - PERIPH_BASE
    return ERR, 0


def arbitrate(sub_i, sub_d, last: list[int], ready) -> tuple[bool, bool]:
    """Grant decision for the two ports.

    ``sub_i``/``sub_d`` are target subordinates (None when idle), ``last`` the
    per-subordinate port granted most recently (updated in place), ``ready``
    the per-subordinate availability.  Instruction port wins a first tie.
    """
    gi = sub_i is not None and ready[sub_i]
    gd = sub_d is not None and ready[sub_d]
    if gi and gd and sub_i == sub_d and sub_i != ERR:
        if last[sub_i] == I_PORT:
            gi = False
        else:
            gd = False
    if gi and sub_i != ERR:
        last[sub_i] = I_PORT
    if gd and sub_d != ERR:
        last[sub_d] = D_PORT
    return gi, gd


@dataclass
class RouteState:
    last_grant: list[int] = field(default_factory=lambda: [D_PORT] * 4)
    outstanding: list = field(default_factory=lambda: [None, None])


def route_cycle(state: RouteState, requests, ready=(True, True, True, True)):
    """One cycle of the standalone fabric.

    ``requests`` holds one byte address (or None) per manager.  Returns
    ``(new_state, grants, deliveries)`` where ``deliveries[m]`` names the
    subordinate answering manager ``m`` this cycle (from last cycle's grant).
    """
    last = list(state.last_grant)
    subs = [decode_addr(a)[0] if a is not None else None for a in requests]
    gi, gd = arbitrate(subs[0], subs[1], last, ready)
    grants = [gi, gd]
    deliveries = list(state.outstanding)
    outstanding = [subs[m] if grants[m] else None for m in range(2)]
    return RouteState(last, outstanding), grants, deliveries


class FabricRegs:
    """Fabric state in the flat registry: response source per port and round-robin bits."""

    def __init__(self, reg):
        # source is subordinate + 1, zero when nothing is in flight
        self.src = [reg.add("fabric.i_src", 3, "fabric"), reg.add("fabric.d_src", 3, "fabric")]
        self.last = [reg.add(f"fabric.rr.{n}", 1, "fabric", reset=D_PORT) for n in SUBORDINATES[:3]]


# ---------------------------------------------------------------------------
# Wiring descriptor and protection audit.


@dataclass(frozen=True)
class Segment:
    src: str
    dst: str
    protection: str  # "raw", "ecc", "tmr" or "ecc+tmr"


@dataclass
class Wiring:
    config: str
    codec_site: str  # "bank" or "replica"
    voted_payload_bits: int
    segments: list[Segment]
    domains: dict[str, str]

    def unprotected(self) -> list[Segment]:
        """Raw segments whose endpoints sit in different protection domains."""
        return [g for g in self.segments
                if g.protection == "raw" and self.domains[g.src] != self.domains[g.dst]]

    def reachable(self, a: str, b: str) -> bool:
        adj: dict[str, list[str]] = {}
        for g in self.segments:
            adj.setdefault(g.src, []).append(g.dst)
        seen, q = {a}, deque([a])
        while q:
            n = q.popleft()
            if n == b:
                return True
            for m in adj.get(n, ()):
                if m not in seen:
                    seen.add(m)
                    q.append(m)
        return False

    def reencode_sites(self) -> list[str]:
        """Nodes where a payload is decoded and re-encoded inside the fabric."""
        return [n for n in self.domains if n.startswith("fabric.") and "codec" in n]


def set_overlap_mode(cfg) -> Wiring:
    """Describe the request/response payload path for a configuration."""
    if not isinstance(cfg, SocConfig):
        cfg = SocConfig.of(cfg)
    segs: list[Segment] = []
    dom: dict[str, str] = {"fabric": "bus", "sram": "mem", "periph": "periph", "bridge": "periph"}
    reps = range(3) if cfg.tcls else range(1)
    if cfg.overlap:
        for k in reps:
            core, enc, dec = f"core.r{k}", f"enc.r{k}", f"dec.r{k}"
            dom.update({core: f"tcls.r{k}", enc: f"tcls.r{k}", dec: f"tcls.r{k}"})
            segs += [Segment(core, enc, "raw"), Segment(enc, "voter", "ecc"),
                     Segment("fabric", dec, "ecc"), Segment(dec, core, "raw")]
        dom["voter"] = "bus"
        segs += [Segment("voter", "fabric", "ecc+tmr"), Segment("fabric", "sram", "ecc"),
                 Segment("sram", "fabric", "ecc"), Segment("fabric", "bridge", "ecc+tmr"),
                 Segment("bridge", "fabric", "ecc"), Segment("bridge", "periph", "raw"),
                 Segment("periph", "bridge", "raw")]
        return Wiring(cfg.name, "replica", 39, segs, dom)
    dom.update({"bank.enc": "mem", "bank.dec": "mem"})
    for k in reps:
        core = f"core.r{k}"
        dom[core] = f"tcls.r{k}" if cfg.tcls else "core"
        if cfg.tcls:
            segs += [Segment(core, "voter", "raw"), Segment("fabric", core, "raw")]
        else:
            segs += [Segment(core, "fabric", "raw"), Segment("fabric", core, "raw")]
    if cfg.tcls:
        dom["voter"] = "bus"
        segs.append(Segment("voter", "fabric", "raw"))
    mem = "ecc" if cfg.ecc else ("tmr" if cfg.tmrg else "raw")
    if cfg.ecc:
        segs += [Segment("fabric", "bank.enc", "raw"), Segment("bank.enc", "sram", "ecc"),
                 Segment("sram", "bank.dec", "ecc"), Segment("bank.dec", "fabric", "raw")]
    else:
        segs += [Segment("fabric", "sram", mem), Segment("sram", "fabric", mem)]
    segs += [Segment("fabric", "periph", "raw"), Segment("periph", "fabric", "raw")]
    if cfg.tmrg:
        segs = [Segment(g.src, g.dst, "tmr") for g in segs]
    return Wiring(cfg.name, "bank" if cfg.ecc else "none", 32, segs, dom)


def audit(cfg) -> dict:
    w = set_overlap_mode(cfg)
    return {"config": w.config, "codec_site": w.codec_site,
            "voted_payload_bits": w.voted_payload_bits,
            "unprotected_segments": len(w.unprotected()),
            "reencode_sites": len(w.reencode_sites())}

