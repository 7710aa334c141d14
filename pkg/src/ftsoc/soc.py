"""Integrated micro-SoC for every protection configuration.

One :class:`Soc` owns a :class:`~ftsoc.registry.StateRegistry` with all
flip-flops and the SRAM arrays.  ``step`` advances one clock cycle and
returns the monitored outputs plus the fault flags raised in that cycle.

Transient faults on combinational nets are passed to ``step`` as a *tap*
``(net_id, xor_mask)``; the net table in :attr:`Soc.nets` lists every net a
tap may target.  Nets whose ``replica`` is set belong to one copy of
triplicated logic.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import core as C
from . import ecc
from . import peripherals as P
from .config import SocConfig
from .interconnect import BANK0, BANK1, ERR, PERIPH, FabricRegs, arbitrate, decode_addr
from .memory import ECC, RAW, TRIPLE, AccessResult, BankCtl, SramBank
from .redundancy import majority
from .registry import StateRegistry
from .workload import build_program

MASK32 = 0xFFFFFFFF

# fault-flag slots, in monitor order
F_CORE, F_CORR, F_UNC, F_BUS, F_PERIPH = range(5)
_SOURCE_SLOT = {n: i for i, n in enumerate(P.MON_SOURCES)}


@dataclass(frozen=True)
class Net:
    name: str
    width: int
    scenarios: frozenset
    replica: int = -1  # copy of triplicated logic, -1 for single nets
    flag_only: bool = False  # copy of voted logic: a flip is outvoted


class Soc:
    def __init__(self, cfg: SocConfig | str = "cfg0", program=None):
        if not isinstance(cfg, SocConfig):
            cfg = SocConfig.of(cfg)
        self.cfg = cfg
        if program is None:
            prog = build_program()
            program = (list(prog.words), prog.entry)
        self.image, self.entry = list(program[0]), program[1]
        self.reg = reg = StateRegistry()
        self.nets: list[Net] = []
        self.net_ids: dict[str, int] = {}
        tcls, overlap, tmrg = cfg.tcls, cfg.overlap, cfg.tmrg

        # cores
        if tcls:
            self.cores = []
            for k in range(3):
                b = len(reg)
                for name, w in C.FIELD_SPECS:
                    reg.add(f"core.r{k}.{name}", w, "core")
                self.cores.append(b)
            self.resync = reg.add("tcls.resync_count", 7, "tcls")
        else:
            with reg.tmr("core", "core", enabled=tmrg, source="core"):
                b = None
                for name, w in C.FIELD_SPECS:
                    i = reg.add(f"core.{name}", w, "core")
                    b = i if b is None else b
            self.cores = [b]
        self.core_taps = []

        # fabric
        with reg.tmr("fabric", "fabric", enabled=overlap or tmrg, source="bus"):
            self.F = FabricRegs(reg)

        # memory
        mode = ECC if cfg.ecc else (TRIPLE if tmrg else RAW)
        self.srams = [SramBank(cfg.bank_words, mode) for _ in range(2)]
        with reg.tmr("mem_ctl", "mem_ctl", enabled=overlap or tmrg, source="bus"):
            self.banks = []
            for b, sram in enumerate(self.srams):
                ctl = BankCtl(reg, f"bank{b}", sram, overlap, cfg.scrub_period, cfg.fix_queue_depth)
                ctl.declare_ctl(reg)
                self.banks.append(ctl)
        self.arrays = []
        for ctl in self.banks:
            ctl.aid = len(self.arrays)
            self.arrays.extend(ctl.sram.arrays)

        # peripherals
        with reg.tmr("periph", "periph", enabled=cfg.tmr_periph or tmrg, source="periph"):
            self.P = P.PeriphRegs(reg, cfg.uart_divider)
        reg.seal_compare()
        self.M = P.MonitorRegs(reg) if cfg.monitor else None
        self.groups = [(g.lo, g.n, _SOURCE_SLOT[g.source]) for g in reg.groups]

        self._declare_nets()
        self.reset_values = reg.values[:]
        self.cycle = 0
        self.diag_unresolved = 0
        self.reset()

    # -- nets -----------------------------------------------------------------

    def _net(self, name, width, scen=("set",), replica=-1, flag_only=False) -> int:
        i = len(self.nets)
        self.nets.append(Net(name, width, frozenset(scen), replica, flag_only))
        self.net_ids[name] = i
        return i

    def _declare_nets(self) -> None:
        cfg = self.cfg
        n = self._net
        copies = 3 if (cfg.tcls or cfg.tmrg) else 1
        for k in range(copies):
            pre = f"core.r{k}" if copies == 3 else "core"
            t = C.CoreTaps()
            t.rf1 = len(self.nets)
            for j in range(15):
                n(f"{pre}.rf_port1.node{j}", 32, replica=k if copies == 3 else -1)
            t.rf2 = len(self.nets)
            for j in range(15):
                n(f"{pre}.rf_port2.node{j}", 32, replica=k if copies == 3 else -1)
            for name, w in C.DATAPATH_NETS:
                setattr(t, name, n(f"{pre}.{name}", w, replica=k if copies == 3 else -1))
            self.core_taps.append(t)
        self.core_net_range = (0, len(self.nets))

        both = ("set", "port")
        if cfg.overlap:
            self.n_enc = [[n(f"enc.r{k}.{x}", 39, replica=k) for x in ("i_addr", "d_addr", "d_wdata")]
                          for k in range(3)]
            self.n_dec = [[n(f"dec.r{k}.{x}", 32, both, replica=k) for x in ("i_rdata", "d_rdata")]
                          for k in range(3)]
            self.n_vote = {x: n(f"vote.{x}", 39, both) for x in ("i_addr", "d_addr", "d_wdata")}
            self.n_hs = {x: [n(f"vote.{x}.r{j}", w, both, flag_only=True) for j in range(3)]
                         for x, w in (("i_valid", 1), ("d_valid", 1), ("d_write", 1), ("d_be", 4))}
            self.n_adec = [[n(f"relobi.{p}_adec.r{j}", 32, both, flag_only=True) for j in range(3)]
                           for p in ("i", "d")]
            if cfg.tmr_periph:
                self.n_bridge_dec = [n(f"bridge.dec.r{j}", 32, flag_only=True) for j in range(3)]
                self.n_bridge_enc = [n(f"bridge.enc.r{j}", 39, flag_only=True) for j in range(3)]
            else:
                self.n_bridge_dec = [n("bridge.dec", 32)]
                self.n_bridge_enc = [n("bridge.enc", 39)]
        elif cfg.tcls:
            self.n_vote = {x: n(f"vote.{x}", w, both) for x, w in (
                ("i_valid", 1), ("i_addr", 32), ("d_valid", 1), ("d_write", 1),
                ("d_addr", 32), ("d_wdata", 32), ("d_be", 4))}
        if cfg.tcls:
            self.n_busy = n("vote.busy", 1, both)
        else:
            self.n_busy = n("pin.busy", 1)
        if cfg.ecc:
            self.n_bank = []
            for b in range(2):
                enc = n(f"bank{b}.enc", 39)
                rmw = n(f"bank{b}.rmw_dec", 32)
                dec = -1 if cfg.overlap else n(f"bank{b}.dec", 32, both)
                self.n_bank.append((enc, rmw, dec))
        if cfg.overlap or cfg.tmrg:
            self.n_grant = [[n(f"fabric.grant.{p}.c{j}", 1, flag_only=True) for j in range(3)]
                            for p in ("i", "d")]
            if cfg.tmrg:
                self.n_fadec = [[n(f"fabric.adec.{p}.c{j}", 32, flag_only=True) for j in range(3)]
                                for p in ("i", "d")]
        else:
            self.n_grant = [[n(f"fabric.grant.{p}", 1)] for p in ("i", "d")]
            self.n_fadec = [[n(f"fabric.adec.{p}", 32)] for p in ("i", "d")]
        if cfg.tmr_periph:
            self.n_irq = [n(f"irq.r{k}", 1, replica=k) for k in range(3)]
        self.n_tx = n("pin.uart_tx", 1)
        self.n_gpio = n("pin.gpio", cfg.gpio_pads)
        self.flag_only = [x.flag_only for x in self.nets]
        self.net_replica = [x.replica for x in self.nets]

    def net(self, name: str) -> int:
        return self.net_ids[name]

    # -- state ----------------------------------------------------------------

    @property
    def s(self) -> list[int]:
        return self.reg.values

    def reset(self) -> None:
        self.reg.values[:] = self.reset_values
        for b in self.cores:
            self.reg.values[b + C.PC] = self.entry
        self._mirror()
        for sram in self.srams:
            for arr in sram.arrays:
                arr[:] = [0] * sram.words
        self.srams[0].load(self.image)
        self.cycle = 0

    def _mirror(self) -> None:
        s = self.reg.values
        for lo, n, _ in self.groups:
            s[lo + n:lo + 2 * n] = s[lo:lo + n]
            s[lo + 2 * n:lo + 3 * n] = s[lo:lo + n]

    @property
    def compare_limit(self) -> int:
        return self.reg.compare_limit

    def regs_key(self):
        return tuple(self.reg.values[:self.reg.compare_limit])

    def snapshot(self):
        return self.reg.values[:], [a[:] for a in self.arrays], self.cycle

    def restore(self, snap) -> None:
        vals, arrs, cyc = snap
        self.reg.values[:] = vals
        for a, b in zip(self.arrays, arrs):
            a[:] = b
        self.cycle = cyc

    def halted(self) -> bool:
        s = self.reg.values
        if self.cfg.tcls:
            return majority(*(s[b + C.HALT] | s[b + C.EXC] for b in self.cores)) == 1
        b = self.cores[0]
        return bool(s[b + C.HALT] or s[b + C.EXC])

    def outputs(self):
        """``(uart_tx, gpio, busy, exception, retval)`` from the current state."""
        s = self.reg.values
        if self.cfg.tcls:
            bs = self.cores
            busy = majority(*(C.busy(s, b) for b in bs))
            exc = majority(*(s[b + C.EXC] for b in bs))
        else:
            busy = C.busy(s, self.cores[0])
            exc = s[self.cores[0] + C.EXC]
        return (P.uart_tx(s, self.P), s[self.P.gpio], busy, exc, s[self.P.retval])

    def monitor(self) -> dict[str, int]:
        if self.M is None:
            return {n: 0 for n in P.MON_SOURCES}
        return P.monitor_readout(self.reg.values, self.M)

    def bank_data(self, b: int, idx: int) -> int:
        return self.srams[b].data(idx)

    # -- cycle ----------------------------------------------------------------

    def _vote_groups(self, s, flags) -> None:
        for lo, n, slot in self.groups:
            a = s[lo:lo + n]
            b = s[lo + n:lo + 2 * n]
            c = s[lo + 2 * n:lo + 3 * n]
            if a == b == c:
                continue
            flags[slot] = 1
            v = [(x & y) | (x & z) | (y & z) for x, y, z in zip(a, b, c)]
            s[lo:lo + n] = v
            s[lo + n:lo + 2 * n] = v
            s[lo + 2 * n:lo + 3 * n] = v

    def _response(self, s, src, port, tap, flags):
        """Response seen by the managers of ``port``: ``(valid, payload, err)``."""
        if not src:
            return 0, 0, 0
        sub = src - 1
        cfg = self.cfg
        if sub >= ERR:  # unused select codes fall to the default (error) arm
            return 1, 0, 1
        if sub == PERIPH:
            v = s[self.P.prdata]
            if cfg.overlap:
                v = ecc.encode(v)
                if tap:
                    v = self._tap_voted(tap, self.n_bridge_enc, v, flags)
            return 1, v, 0
        v = s[self.banks[sub].rdata]
        if cfg.ecc and not cfg.overlap:
            d, st = ecc.decode_fast(v)
            if st == 1:
                flags[F_CORR] = 1
            elif st == 2:
                flags[F_UNC] = 1
            if tap and tap[0] == self.n_bank[sub][2]:
                d ^= tap[1]
            return 1, d, 0
        return 1, v, 0

    def _tap_voted(self, tap, ids, v, flags):
        """Apply a tap to a net that is either single or one of three voted copies."""
        if tap[0] in ids:
            if len(ids) == 1:
                return v ^ tap[1]
            flags[F_BUS] = 1
        return v

    def step(self, tap=None):
        """Advance one cycle; returns ``(outputs, flags)``."""
        s = self.reg.values
        cfg = self.cfg
        flags = [0, 0, 0, 0, 0]
        if self.groups:
            self._vote_groups(s, flags)
        F = self.F
        Pr = self.P
        i_rsp = self._response(s, s[F.src[0]], 0, tap, flags)
        d_rsp = self._response(s, s[F.src[1]], 1, tap, flags)
        irq = s[Pr.pending]

        if cfg.tcls:
            req = self._tcls(s, i_rsp, d_rsp, irq, tap, flags)
        else:
            b = self.cores[0]
            ctap = tap if tap and tap[0] < self.core_net_range[1] else None
            ct = self.core_taps[max(0, self.net_replica[tap[0]])] if ctap else self.core_taps[0]
            iaddr, dreq, w_ok, w_stall = C.core_eval(
                s, b, i_rsp[0], i_rsp[1], i_rsp[2], d_rsp[0], d_rsp[1], d_rsp[2], irq, ctap, ct)
            req = (iaddr, dreq, ((b, iaddr, dreq, w_ok, w_stall),))
        iaddr, dreq, commits = req

        # address decode and arbitration
        words = cfg.bank_words
        sub_i = sub_d = None
        if iaddr is not None:
            if tap and not cfg.overlap:
                iaddr = self._tap_voted(tap, self.n_fadec[0], iaddr, flags)
            sub_i, loc_i = decode_addr(iaddr, words)
            if sub_i == PERIPH and not P.mmio_valid(loc_i, 0):
                sub_i = ERR
        if dreq is not None:
            d_addr = dreq[1]
            if tap and not cfg.overlap:
                d_addr = self._tap_voted(tap, self.n_fadec[1], d_addr, flags)
            sub_d, loc_d = decode_addr(d_addr, words)
            if sub_d == PERIPH and not P.mmio_valid(loc_d, dreq[0]):
                sub_d = ERR
        last = [s[i] for i in F.last] + [0]
        ready = (not s[self.banks[0].busy], not s[self.banks[1].busy], True, True)
        gi, gd = arbitrate(sub_i, sub_d, last, ready)
        if tap:
            g = self.n_grant
            if tap[0] in g[0]:
                if len(g[0]) == 1:
                    gi = not gi and sub_i is not None
                else:
                    flags[F_BUS] = 1
            elif tap[0] in g[1]:
                if len(g[1]) == 1:
                    gd = not gd and sub_d is not None
                else:
                    flags[F_BUS] = 1
        for i, v in zip(F.last, last):
            s[i] = v

        # cores commit
        for b, ia, dr, w_ok, w_stall in commits:
            ok = (ia is None or gi) and (dr is None or gd)
            for off, v in (w_ok if ok else w_stall):
                s[b + off] = v

        # subordinates
        res = AccessResult()
        served = [False, False]
        periph_req = None
        if gi and sub_i is not None and sub_i < PERIPH:
            self.banks[sub_i].cycle = self.cycle
            self.banks[sub_i].access(s, 0, loc_i % words, 0, 0xF, res)
            served[sub_i] = True
        elif gi and sub_i == PERIPH:
            periph_req = (0, loc_i, 0, 0xF)
        if gd and sub_d is not None and sub_d < PERIPH:
            ctl = self.banks[sub_d]
            ctl.cycle = self.cycle
            btap = self.n_bank[sub_d] if cfg.ecc else None
            ctl.access(s, dreq[0], loc_d % words, dreq[2], dreq[3], res, tap, btap)
            served[sub_d] = True
        elif gd and sub_d == PERIPH:
            wdata = dreq[2]
            if cfg.overlap and dreq[0]:
                wdata, st = ecc.decode_fast(wdata)
                if st == 1:
                    flags[F_CORR] = 1
                elif st == 2:
                    flags[F_UNC] = 1
                if tap:
                    wdata = self._tap_voted(tap, self.n_bridge_dec, wdata, flags)
            periph_req = (dreq[0], loc_d, wdata, dreq[3])
        en = s[Pr.scrub_en]
        for b in (0, 1):
            if not served[b]:
                ctl = self.banks[b]
                ctl.cycle = self.cycle
                ctl.idle(s, en, res)
        if res.corrected:
            flags[F_CORR] = 1
        if res.uncorrectable:
            flags[F_UNC] = 1
        P.periph_cycle(s, Pr, self.M, periph_req)
        s[F.src[0]] = sub_i + 1 if gi else 0
        s[F.src[1]] = sub_d + 1 if gd else 0

        if cfg.tcls:
            self._resync_tick(s, req, flags)
        if self.M is not None:
            P.monitor_cycle(s, self.M, flags)
        for lo, n, _ in self.groups:
            s[lo + n:lo + 2 * n] = s[lo:lo + n]
            s[lo + 2 * n:lo + 3 * n] = s[lo:lo + n]
        self.cycle += 1

        out = self.outputs()
        if tap:
            t = tap[0]
            if t == self.n_tx or t == self.n_gpio or t == self.n_busy:
                out = list(out)
                if t == self.n_tx:
                    out[0] ^= tap[1]
                elif t == self.n_gpio:
                    out[1] ^= tap[1]
                else:
                    out[2] ^= tap[1]
                out = tuple(out)
        return out, flags

    # -- triple-core lockstep -------------------------------------------------

    def _tcls(self, s, i_rsp, d_rsp, irq, tap, flags):
        cfg = self.cfg
        bs = self.cores
        b0, b1, b2 = bs
        n = C.NFIELDS
        tk = self.net_replica[tap[0]] if tap else -1
        same = s[b0:b0 + n] == s[b1:b1 + n] == s[b2:b2 + n]
        overlap = cfg.overlap
        if overlap:
            iv, ipay, ierr = i_rsp
            dv, dpay, derr = d_rsp
            idat, ist = ecc.decode_fast(ipay) if iv and not ierr else (0, 0)
            ddat, dst = ecc.decode_fast(dpay) if dv and not derr else (0, 0)
            if ist == 1 or dst == 1:
                flags[F_CORR] = 1
            if ist == 2 or dst == 2:
                flags[F_UNC] = 1
        else:
            idat, ddat = i_rsp[1], d_rsp[1]
        outs = []
        commits = []
        reps = (0,) if same and tk < 0 else (0, 1, 2)
        for k in reps:
            b = bs[k]
            i_d, d_d, irq_k = idat, ddat, irq
            ctap = None
            if tk == k:
                t = tap[0]
                if t < self.core_net_range[1]:
                    ctap = tap
                elif overlap and t == self.n_dec[k][0]:
                    i_d ^= tap[1]
                elif overlap and t == self.n_dec[k][1]:
                    d_d ^= tap[1]
                elif cfg.tmr_periph and t == self.n_irq[k]:
                    irq_k ^= tap[1]
            ia, dr, w_ok, w_stall = C.core_eval(s, b, i_rsp[0], i_d, i_rsp[2], d_rsp[0], d_d, d_rsp[2],
                                                irq_k, ctap, self.core_taps[k])
            if overlap:
                ea = ecc.encode(ia) if ia is not None else 0
                if dr is not None:
                    eda, edd = ecc.encode(dr[1]), ecc.encode(dr[2])
                else:
                    eda = edd = 0
                if tk == k:
                    t = tap[0]
                    ne = self.n_enc[k]
                    if t == ne[0]:
                        ea ^= tap[1]
                    elif t == ne[1]:
                        eda ^= tap[1]
                    elif t == ne[2]:
                        edd ^= tap[1]
                o = (ia is not None, ea, dr is not None, dr[0] if dr else 0, eda, edd,
                     dr[3] if dr else 0, C.busy(s, b))
            else:
                o = (ia is not None, ia or 0, dr is not None, dr[0] if dr else 0,
                     dr[1] if dr else 0, dr[2] if dr else 0, dr[3] if dr else 0, C.busy(s, b))
            outs.append(o)
            commits.append((b, ia, dr, w_ok, w_stall))
        if len(reps) == 1:
            mismatch = False
            v = list(outs[0])
            b = commits[0]
            commits = [b, (b1,) + b[1:], (b2,) + b[1:]]
        else:
            mismatch = not (outs[0] == outs[1] == outs[2])
            v = [majority(x, y, z) for x, y, z in zip(*outs)]
        self._mismatch = mismatch
        iv_, ia_, dv_, dw_, da_, dd_, dbe_ = v[:7]
        if tap:
            t = tap[0]
            nv = self.n_vote
            if overlap:
                if t == nv["i_addr"]:
                    ia_ ^= tap[1]
                elif t == nv["d_addr"]:
                    da_ ^= tap[1]
                elif t == nv["d_wdata"]:
                    dd_ ^= tap[1]
                elif self.flag_only[t] and any(t in ids for ids in self.n_hs.values()):
                    flags[F_BUS] = 1
            else:
                if t == nv["i_valid"]:
                    iv_ ^= 1
                elif t == nv["i_addr"]:
                    ia_ ^= tap[1]
                elif t == nv["d_valid"]:
                    dv_ ^= 1
                elif t == nv["d_write"]:
                    dw_ ^= 1
                elif t == nv["d_addr"]:
                    da_ ^= tap[1]
                elif t == nv["d_wdata"]:
                    dd_ ^= tap[1]
                elif t == nv["d_be"]:
                    dbe_ ^= tap[1]
        if overlap:
            # relOBI address decoders: three copies, voted, ungated
            iaddr = dreq = None
            a, st = ecc.decode_fast(ia_)
            b_, st2 = ecc.decode_fast(da_)
            if st == 1 or st2 == 1:
                flags[F_CORR] = 1
            if st == 2 or st2 == 2:
                flags[F_UNC] = 1
            if tap and self.flag_only[tap[0]] and (tap[0] in self.n_adec[0] or tap[0] in self.n_adec[1]):
                flags[F_BUS] = 1
            if iv_:
                iaddr = a
            if dv_:
                dreq = (dw_, b_, dd_, dbe_)
        else:
            iaddr = ia_ if iv_ else None
            dreq = (dw_, da_, dd_, dbe_) if dv_ else None
        return iaddr, dreq, commits

    def _resync_tick(self, s, req, flags) -> None:
        bs = self.cores
        n = C.NFIELDS
        cnt = s[self.resync]
        if cnt:
            cnt -= 1
            if not cnt:
                b0, b1, b2 = bs
                for i in range(n):
                    x, y, z = s[b0 + i], s[b1 + i], s[b2 + i]
                    if x != y and y != z and x != z:
                        self.diag_unresolved += 1
                    m = (x & y) | (x & z) | (y & z)
                    s[b0 + i] = s[b1 + i] = s[b2 + i] = m
                flags[F_CORE] = 1
        elif self._mismatch:
            cnt = self.cfg.resync_latency
        s[self.resync] = cnt

    # -- copy-local faults in triplicated logic -------------------------------

    def step_copy(self, tap, k: int):
        """Step with ``tap`` acting only inside logic copy ``k`` of a fully
        triplicated design: copy ``k`` of every register (and SRAM array)
        receives the faulty next state, the other copies the clean one."""
        s = self.reg.values
        before = s[:]
        undo: list = []
        for ctl in self.banks:
            ctl.undo = undo
        try:
            self.step(tap)
            faulty = s[:]
            f_writes = {(a, i): self.arrays[a][i] for a, i, _ in undo}
            for a, i, old in reversed(undo):
                self.arrays[a][i] = old
            n_f = len(undo)
            s[:] = before
            self.cycle -= 1
            out, flags = self.step(None)
            c_writes = undo[n_f:]
        finally:
            for ctl in self.banks:
                ctl.undo = None
        for lo, n, _ in self.groups:
            s[lo + k * n:lo + (k + 1) * n] = faulty[lo:lo + n]
        for ctl in self.banks:
            if len(ctl.sram.arrays) != 3:
                continue
            aid = ctl.aid + k
            for (a, i), v in f_writes.items():
                if a == aid:
                    self.arrays[a][i] = v
                    if ctl.dirty is not None:
                        ctl.dirty.add((a, i))
            for a, i, old in c_writes:
                if a == aid and (a, i) not in f_writes:
                    self.arrays[a][i] = old
        return out, flags
