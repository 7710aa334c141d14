"""Fault targets, golden reference, single-fault runs and campaigns.

A faulty run restarts from the nearest golden checkpoint, injects, and then
compares the monitored outputs against the golden trace every cycle.  It
stops early when

* an uncorrectable ECC event is raised (class Uncorrectable),
* a monitored output diverges (class Failure), or
* the register state hashes equal to golden and no SRAM word differs, after
  which the run is indistinguishable from golden (Corrected or Masked).

When only SRAM words differ the run jumps ahead to the next golden access
of any differing word, since nothing can change before then.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import multiprocessing as mp
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import ecc
from .config import SocConfig
from .redundancy import majority
from .soc import F_UNC, Soc

CLASSES = ("Masked", "Corrected", "Uncorrectable", "Latent", "Failure")
SCENARIOS = ("ff_all", "ff_excl", "set", "port")
_SCENARIO_ALIASES = {
    "ff_all": "ff_all", "ff-all": "ff_all", "ff": "ff_all",
    "ff_excl": "ff_excl", "ff-excl": "ff_excl", "ff-excl-sram": "ff_excl", "ff_excl_sram": "ff_excl",
    "set": "set", "set-netlist-style": "set",
    "port": "port", "port-voters": "port",
}
CHECKPOINT_EVERY = 32


class ConfigurationError(ValueError):
    pass


class HarnessError(RuntimeError):
    pass


def parse_scenario(name: str) -> str:
    try:
        return _SCENARIO_ALIASES[name.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"unknown scenario {name!r}") from None


# ---------------------------------------------------------------------------
# Targets


@dataclass(frozen=True)
class FaultTarget:
    id: str
    kind: str  # state | sram | net | dinput | voter
    domain: str
    ref: object
    bit: int


@dataclass(frozen=True)
class FaultSpec:
    target: FaultTarget
    cycle: int
    extra_bits: tuple = ()  # further bits in the same word (calibration only)

    @property
    def kind(self) -> str:
        return {"state": "StateBit", "sram": "StateBit", "dinput": "CombTap",
                "voter": "CombTap", "net": "CombTap"}[self.target.kind]


@dataclass(frozen=True)
class _Block:
    kind: str
    ref: object
    width: int
    count: int
    name: str
    domain: str


class TargetSpace:
    """All bits of one scenario, indexable without materializing every target."""

    def __init__(self, blocks: list[_Block]):
        self.blocks = blocks
        self.starts = []
        n = 0
        for b in blocks:
            self.starts.append(n)
            n += b.count
        self.total = n

    def __len__(self) -> int:
        return self.total

    def __getitem__(self, i: int) -> FaultTarget:
        if not 0 <= i < self.total:
            raise IndexError(i)
        k = bisect.bisect_right(self.starts, i) - 1
        b = self.blocks[k]
        off = i - self.starts[k]
        if b.kind == "sram":
            aid, words = b.ref
            idx, bit = divmod(off, b.width)
            return FaultTarget(f"sram:{b.name}[{idx}].{bit}", "sram", "sram", (aid, idx), bit)
        return FaultTarget(f"{b.kind}:{b.name}.{off}", b.kind, b.domain, b.ref, off)

    def __iter__(self):
        for i in range(self.total):
            yield self[i]

    def find(self, target_id: str) -> int:
        """Index of a target given its id (as written to ``faults.csv``)."""
        kind, _, rest = target_id.partition(":")
        for b, start in zip(self.blocks, self.starts):
            if b.kind != kind:
                continue
            if kind == "sram":
                head = b.name + "["
                if rest.startswith(head) and "]." in rest:
                    idx, bit = rest[len(head):].split("].")
                    idx, bit = int(idx), int(bit)
                    if 0 <= idx < b.ref[1] and 0 <= bit < b.width:
                        return start + idx * b.width + bit
            else:
                name, _, bit = rest.rpartition(".")
                if name == b.name and bit.isdigit() and int(bit) < b.width:
                    return start + int(bit)
        raise KeyError(f"no target {target_id!r} in this scenario")

    def count_by_domain(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for b in self.blocks:
            out[b.domain] = out.get(b.domain, 0) + b.count
        return out


def _state_blocks(soc: Soc, kind: str = "state", replicas_only: bool = False) -> list[_Block]:
    out = []
    for f in soc.reg.fields:
        if replicas_only and f.replica is None:
            continue
        out.append(_Block(kind, f.index, f.width, f.width, f.name, f.domain))
    return out


def _sram_blocks(soc: Soc) -> list[_Block]:
    out = []
    for b, ctl in enumerate(soc.banks):
        arrs = ctl.sram.arrays
        for k in range(len(arrs)):
            name = f"bank{b}" if len(arrs) == 1 else f"bank{b}.c{k}"
            w = ctl.sram.cell_bits
            out.append(_Block("sram", (ctl.aid + k, ctl.words), w, w * ctl.words, name, "sram"))
    return out


def enumerate_targets(config, scenario: str, soc: Soc | None = None) -> TargetSpace:
    scenario = parse_scenario(scenario)
    soc = soc or Soc(config)
    if scenario == "ff_all":
        blocks = _state_blocks(soc) + _sram_blocks(soc)
    elif scenario == "ff_excl":
        blocks = _state_blocks(soc)
    elif scenario == "set":
        blocks = [_Block("net", i, n.width, n.width, n.name, n.name.split(".")[0])
                  for i, n in enumerate(soc.nets) if "set" in n.scenarios]
        blocks += _state_blocks(soc, "dinput")
        blocks += _state_blocks(soc, "voter", replicas_only=True)
    else:
        blocks = [_Block("net", i, n.width, n.width, n.name, n.name.split(".")[0])
                  for i, n in enumerate(soc.nets) if "port" in n.scenarios]
    space = TargetSpace(blocks)
    if not len(space):
        raise ConfigurationError(f"{soc.cfg.name} has no targets for scenario {scenario}")
    return space


def sram_targets_only(space: TargetSpace) -> TargetSpace:
    return TargetSpace([b for b in space.blocks if b.kind == "sram"])


# ---------------------------------------------------------------------------
# Golden reference


@dataclass
class Golden:
    cfg: SocConfig
    length: int
    setup: int
    outputs: list
    hashes: list
    checkpoints: dict
    writes: dict  # (array, index) -> ([cycles], [values])
    accesses: dict  # (array, index) -> [cycles]
    initial: list
    final: list
    retval: int
    trace: list = field(default_factory=list)

    @property
    def window(self) -> tuple[int, int]:
        return self.setup, self.length

    def value_at(self, a: int, i: int, t: int) -> int:
        """Golden content of a word in the state entering cycle ``t``."""
        w = self.writes.get((a, i))
        if w is None:
            return self.initial[a][i]
        k = bisect.bisect_left(w[0], t)
        return w[1][k - 1] if k else self.initial[a][i]

    def next_access(self, a: int, i: int, t: int):
        c = self.accesses.get((a, i))
        if not c:
            return None
        k = bisect.bisect_left(c, t)
        return c[k] if k < len(c) else None

    @property
    def status_ok(self) -> bool:
        return self.retval >> 31 == 1 and self.retval & 0x7FFFFFFF == 0


def run_golden(config, soc: Soc | None = None, budget: int = 200_000, keep_trace: bool = False) -> Golden:
    """Fault-free reference run with checkpoints and per-word access logs."""
    soc = soc or Soc(config)
    soc.reset()
    initial = [a[:] for a in soc.arrays]
    undo: list = []
    logs = []
    for ctl in soc.banks:
        ctl.log = []
        ctl.undo = undo
        logs.append(ctl.log)
    outputs, hashes, ckpts = [], [], {}
    writes: dict = {}
    setup = None
    su = soc.P.setup_done
    trace = []
    try:
        while True:
            t = soc.cycle
            hashes.append(hash(soc.regs_key()))
            if t % CHECKPOINT_EVERY == 0:
                ckpts[t] = soc.snapshot()
            if soc.halted():
                break
            if t >= budget:
                raise HarnessError(f"golden run exceeded {budget} cycles")
            out, flags = soc.step()
            if any(flags):
                raise HarnessError(f"fault flag raised in fault-free run at cycle {t}: {flags}")
            outputs.append(out)
            if keep_trace:
                trace.append(out)
            if undo:
                for a, i, _ in undo:
                    w = writes.setdefault((a, i), ([], []))
                    w[0].append(t)
                    w[1].append(soc.arrays[a][i])
                undo.clear()
            if setup is None and soc.s[su]:
                setup = soc.cycle
    finally:
        for ctl in soc.banks:
            ctl.log = None
            ctl.undo = None
    accesses: dict = {}
    for ctl, log in zip(soc.banks, logs):
        copies = len(ctl.sram.arrays)
        for c, i in log:
            for k in range(copies):
                accesses.setdefault((ctl.aid + k, i), []).append(c)
    return Golden(soc.cfg, soc.cycle, setup if setup is not None else 0, outputs, hashes, ckpts,
                  writes, accesses, initial, [a[:] for a in soc.arrays], soc.s[soc.P.retval], trace)


# ---------------------------------------------------------------------------
# Single runs


@dataclass
class SimOutcome:
    cls: str
    first_divergence: int | None = None
    monitor: dict = field(default_factory=dict)
    mem_diff: int = 0
    raw_diff: int = 0
    termination: str = "normal"
    end_cycle: int = 0


_TALLY_NAMES = ("core", "ecc_corr", "ecc_unc", "bus", "periph")


def classify(diverged: bool, mem_diff: int, tallies, termination: str = "normal") -> str:
    """Five-way outcome with fixed precedence."""
    if tallies[F_UNC]:
        return "Uncorrectable"
    if diverged or termination in ("timeout", "early"):
        return "Failure"
    if mem_diff:
        return "Latent"
    if any(v for i, v in enumerate(tallies) if i != F_UNC):
        return "Corrected"
    return "Masked"


class Runner:
    """Executes faulty runs against one golden reference."""

    def __init__(self, config, golden: Golden | None = None, soc: Soc | None = None):
        self.soc = soc or Soc(config)
        self.golden = golden or run_golden(self.soc.cfg, self.soc)
        self.copies = {ctl.aid + k: (ctl, k) for ctl in self.soc.banks
                       for k in range(len(ctl.sram.arrays))}

    # memory comparison ------------------------------------------------------

    def _diffs(self, dirty: set, t: int) -> set:
        arrs = self.soc.arrays
        g = self.golden
        return {(a, i) for a, i in dirty if arrs[a][i] != g.value_at(a, i, t)}

    def _word_value(self, arrays, aid: int, i: int) -> int:
        ctl, _ = self.copies[aid]
        base = ctl.aid
        if ctl.sram.mode == "ecc":
            return ecc.decode_fast(arrays[base][i])[0]
        if ctl.sram.mode == "triple":
            return majority(arrays[base][i], arrays[base + 1][i], arrays[base + 2][i])
        return arrays[base][i]

    def _latent(self, dirty: set) -> tuple[int, int]:
        g = self.golden
        arrs = self.soc.arrays
        raw = sum(1 for a, i in dirty if arrs[a][i] != g.final[a][i])
        words = {(self.copies[a][0].aid, i) for a, i in dirty}
        dec = sum(1 for a, i in words if self._word_value(arrs, a, i) != self._word_value(g.final, a, i))
        return dec, raw

    # main loop --------------------------------------------------------------

    def run(self, fault: FaultSpec) -> SimOutcome:
        soc, g = self.soc, self.golden
        L = g.length
        t0 = fault.cycle
        if not 0 <= t0 < L:
            raise ValueError(f"injection cycle {t0} outside golden run of {L} cycles")
        c = t0 - t0 % CHECKPOINT_EVERY
        soc.restore(g.checkpoints[c])
        dirty: set = set()
        for ctl in soc.banks:
            ctl.dirty = dirty
        try:
            for _ in range(c, t0):
                soc.step()
            return self._run_from(fault, dirty)
        finally:
            for ctl in soc.banks:
                ctl.dirty = None

    def _run_from(self, fault: FaultSpec, dirty: set) -> SimOutcome:
        soc, g = self.soc, self.golden
        L = g.length
        tgt = fault.target
        s = soc.s
        bits = (tgt.bit,) + tuple(fault.extra_bits)
        mask = 0
        for b in bits:
            mask |= 1 << b
        tallies = [0, 0, 0, 0, 0]
        t = fault.cycle
        kind = tgt.kind
        if kind == "state":
            s[tgt.ref] ^= mask
        elif kind == "sram":
            a, i = tgt.ref
            soc.arrays[a][i] ^= mask
            dirty.add((a, i))
        if kind == "net":
            net = soc.nets[tgt.ref]
            if soc.cfg.tmrg and net.replica >= 0:
                out, fl = soc.step_copy((tgt.ref, mask), net.replica)
            else:
                out, fl = soc.step((tgt.ref, mask))
        else:
            out, fl = soc.step()
            if kind in ("dinput", "voter"):
                s[tgt.ref] ^= mask
        monitor = soc.cfg.monitor
        hashes = g.hashes
        outs = g.outputs
        while True:
            if monitor:
                for k in range(5):
                    tallies[k] += fl[k]
            if tallies[F_UNC]:
                return self._outcome("Uncorrectable", None, tallies, 0, 0, "early", t + 1)
            if out != outs[t]:
                return self._outcome("Failure", t, tallies, 0, 0, "early", t + 1)
            t += 1
            if t >= L:
                break
            if hash(soc.regs_key()) == hashes[t]:
                if dirty:
                    d = self._diffs(dirty, t)
                    dirty.clear()
                    dirty.update(d)
                if not dirty:
                    cls = classify(False, 0, tallies)
                    return self._outcome(cls, None, tallies, 0, 0, "converged", t)
                t = self._skip(dirty, t)
                if t >= L:
                    break
            out, fl = soc.step()
        dec, raw = self._latent(dirty)
        return self._outcome(classify(False, dec, tallies), None, tallies, dec, raw, "normal", L)

    def _skip(self, dirty: set, t: int) -> int:
        """Registers equal golden, only SRAM differs: jump to the next golden
        access of a differing word (or to the end)."""
        g, soc = self.golden, self.soc
        nxt = [g.next_access(a, i, t) for a, i in dirty]
        nxt = [x for x in nxt if x is not None]
        if not nxt:
            over = {(a, i): soc.arrays[a][i] for a, i in dirty}
            for a, arr in enumerate(soc.arrays):
                arr[:] = g.final[a]
            for (a, i), v in over.items():
                soc.arrays[a][i] = v
            return g.length
        na = min(nxt)
        c = na - na % CHECKPOINT_EVERY
        if c <= t:
            return t
        over = {(a, i): soc.arrays[a][i] for a, i in dirty}
        soc.restore(g.checkpoints[c])
        for (a, i), v in over.items():
            soc.arrays[a][i] = v
        return c

    def _outcome(self, cls, first, tallies, dec, raw, term, end) -> SimOutcome:
        return SimOutcome(cls, first, dict(zip(_TALLY_NAMES, tallies)), dec, raw, term, end)


def run_one(plan_or_config, fault: FaultSpec, runner: Runner | None = None) -> SimOutcome:
    cfg = plan_or_config.config if isinstance(plan_or_config, CampaignPlan) else plan_or_config
    runner = runner or Runner(cfg)
    return runner.run(fault)


# ---------------------------------------------------------------------------
# Campaigns


@dataclass
class CampaignPlan:
    config: SocConfig
    scenario: str = "ff_all"
    n_injections: int = 10_000
    master_seed: int = 1
    sram_only: bool = False

    def __post_init__(self):
        if not isinstance(self.config, SocConfig):
            self.config = SocConfig.of(self.config)
        self.scenario = parse_scenario(self.scenario)
        if self.n_injections < 0:
            raise ConfigurationError("n_injections must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config"] = self.config.to_dict()
        return d

    @property
    def label(self) -> str:
        return f"{self.config.name}-{self.scenario}" + ("-sram" if self.sram_only else "")


PLAN_KEYS = {"config", "scenario", "n", "seed", "scrub_period", "resync_latency", "sram_only",
             "cycle_budget"}


def load_plan(path) -> list[CampaignPlan]:
    """Parse a YAML plan: a mapping, or a mapping with a ``campaigns`` list."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: plan must be a mapping")
    items = doc.get("campaigns", [doc])
    defaults = {k: v for k, v in doc.items() if k != "campaigns"}
    plans = []
    for item in items:
        d = {**defaults, **item}
        unknown = set(d) - PLAN_KEYS
        if unknown:
            raise ConfigurationError(f"{path}: unknown plan keys {sorted(unknown)}")
        if "config" not in d:
            raise ConfigurationError(f"{path}: plan needs a config")
        kw = {k: d[k] for k in ("scrub_period", "resync_latency") if k in d}
        cfg = SocConfig.of(str(d["config"]), **kw)
        plans.append(CampaignPlan(cfg, str(d.get("scenario", "ff_all")), int(d.get("n", 10_000)),
                                  int(d.get("seed", 1)), bool(d.get("sram_only", False))))
    return plans


def sample_faults(plan: CampaignPlan, space: TargetSpace, golden: Golden) -> list[FaultSpec]:
    """Counter-based sampling: fault ``i`` depends only on (seed, i)."""
    s0, s1 = golden.window
    if s1 <= s0:
        raise HarnessError("empty active window")
    out = []
    for i in range(plan.n_injections):
        rng = np.random.Generator(np.random.Philox(key=plan.master_seed, counter=i))
        ti = int(rng.integers(len(space)))
        cyc = int(rng.integers(s0, s1))
        out.append(FaultSpec(space[ti], cyc))
    return out


@dataclass
class CampaignResult:
    plan: CampaignPlan
    faults: list
    outcomes: list
    targets: int
    golden_cycles: int
    window: tuple

    def histogram(self) -> dict[str, int]:
        h = {c: 0 for c in CLASSES}
        for o in self.outcomes:
            h[o.cls] += 1
        return h

    def fractions(self) -> dict[str, float]:
        n = max(1, len(self.outcomes))
        return {c: v / n for c, v in self.histogram().items()}

    def failures(self) -> list[tuple[FaultSpec, SimOutcome]]:
        return [(f, o) for f, o in zip(self.faults, self.outcomes) if o.cls == "Failure"]

    def histogram_json(self) -> str:
        doc = {"plan": self.plan.to_dict(), "targets": self.targets,
               "golden_cycles": self.golden_cycles, "window": list(self.window),
               "counts": self.histogram(), "fractions": self.fractions()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def faults_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fault_id", "target", "kind", "cycle", "class", "first_divergence", "termination",
                    *_TALLY_NAMES, "mem_diff", "raw_diff"])
        for i, (f, o) in enumerate(zip(self.faults, self.outcomes)):
            w.writerow([i, f.target.id, f.kind, f.cycle, o.cls,
                        "" if o.first_divergence is None else o.first_divergence, o.termination,
                        *(o.monitor.get(k, 0) for k in _TALLY_NAMES), o.mem_diff, o.raw_diff])
        return buf.getvalue()

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "histogram.json").write_text(self.histogram_json())
        (out / "faults.csv").write_text(self.faults_csv())
        return out


_WORKER: dict = {}


def _worker_init(cfg: SocConfig, golden: Golden | None):
    _WORKER["runner"] = Runner(cfg, golden)


def _worker_run(chunk):
    r = _WORKER["runner"]
    return [r.run(f) for f in chunk]


def run_campaign(plan: CampaignPlan, workers: int = 1, progress=None) -> CampaignResult:
    if workers < 1:
        raise ConfigurationError("worker count must be at least 1")
    runner = Runner(plan.config)
    golden = runner.golden
    space = enumerate_targets(plan.config, plan.scenario, runner.soc)
    if plan.sram_only:
        space = sram_targets_only(space)
        if not len(space):
            raise ConfigurationError("no SRAM targets in this scenario")
    faults = sample_faults(plan, space, golden)
    outcomes: list = []
    if workers == 1 or len(faults) < 2 * workers:
        for i, f in enumerate(faults):
            outcomes.append(runner.run(f))
            if progress and (i + 1) % 500 == 0:
                progress(i + 1, len(faults))
    else:
        size = max(1, min(200, len(faults) // (workers * 8)))
        chunks = [faults[i:i + size] for i in range(0, len(faults), size)]
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
        with ctx.Pool(workers, initializer=_worker_init, initargs=(plan.config, golden)) as pool:
            for part in pool.imap(_worker_run, chunks):
                outcomes.extend(part)
                if progress:
                    progress(len(outcomes), len(faults))
    return CampaignResult(plan, faults, outcomes, len(space), golden.length, golden.window)


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
