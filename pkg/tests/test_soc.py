import hashlib
import json
from pathlib import Path

import pytest

from ftsoc import ALL_CONFIGS
from ftsoc.faultsim import FaultSpec, FaultTarget, enumerate_targets, run_golden
from ftsoc.peripherals import decode_uart
from ftsoc.soc import Soc

GOLDEN = json.loads((Path(__file__).parent / "data" / "golden.json").read_text())
CONFIGS = [c.value for c in ALL_CONFIGS]


@pytest.mark.parametrize("cfg", CONFIGS)
def test_golden_matches_checked_in_trace(cfg):
    g = run_golden(cfg, keep_trace=True)
    assert g.length == GOLDEN["cycles"]
    assert g.setup == GOLDEN["setup_cycle"]
    assert g.retval == GOLDEN["retval"] and g.status_ok
    assert decode_uart([o[0] for o in g.trace]).decode() == GOLDEN["uart"]
    h = hashlib.sha256(repr([tuple(o[:4]) for o in g.trace]).encode()).hexdigest()
    assert h == GOLDEN["pin_trace_sha256"]


def test_fault_free_monitor_is_zero():
    soc = Soc("cfg4")
    soc.reset()
    while not soc.halted():
        _, flags = soc.step()
        assert not any(flags)
    assert set(soc.monitor().values()) == {0}


def test_replica_state_layout():
    s0, s2 = Soc("cfg0"), Soc("cfg2")
    core0 = sum(f.width for f in s0.reg.fields if f.domain.startswith("core"))
    core2 = sum(f.width for f in s2.reg.fields if f.domain.startswith("core") or f.domain.startswith("tcls"))
    assert 2.9 < core2 / core0 < 3.2


def test_tcls_replica_pc_flip(runner):
    r = runner("cfg2")
    soc = r.soc
    g = r.golden
    t = 400
    soc.restore(g.checkpoints[t - t % 32])
    while soc.cycle < t:
        soc.step()
    pc1 = soc.cores[1]
    soc.s[pc1] ^= 1 << 4
    out, flags = soc.step()
    assert out == g.outputs[t]
    # the disagreement is caught and resolved by resync later on
    o = r.run(FaultSpec(FaultTarget("x", "state", "core", pc1, 4), t))
    assert o.cls == "Corrected" and o.monitor["core"] >= 1


def test_tcls_double_fault_is_boundary(runner):
    r = runner("cfg2")
    soc = r.soc
    g = r.golden
    t = 400
    soc.restore(g.checkpoints[t - t % 32])
    while soc.cycle < t:
        soc.step()
    for k in (0, 1):
        soc.s[soc.cores[k]] ^= 1 << 6
    diverged = False
    for c in range(t, t + 200):
        out, _ = soc.step()
        diverged |= out != g.outputs[c]
    assert diverged


def test_cfg4_gpio_replica_flip(runner):
    r = runner("cfg4")
    soc = r.soc
    idx = soc.reg.index("gpio.out.r1")
    o = r.run(FaultSpec(FaultTarget("x", "state", "periph", idx, 0), 500))
    assert o.cls == "Corrected" and o.monitor["periph"] == 1
    assert o.first_divergence is None


@pytest.mark.parametrize("cfg", ["cfg0", "cfg1"])
@pytest.mark.parametrize("field", ["fabric.i_src", "fabric.d_src"])
def test_unused_source_codes_answer_with_error(runner, cfg, field):
    # flipping the top bit of a 3-bit source register yields codes with no subordinate
    r = runner(cfg)
    space = enumerate_targets(cfg, "ff_excl", r.soc)
    t = space[space.find(f"state:{field}.2")]
    seen = {r.run(FaultSpec(t, c)).cls for c in range(r.golden.setup, r.golden.setup + 48)}
    assert seen <= {"Masked", "Corrected", "Failure"}


@pytest.mark.parametrize("cfg", ["cfg3", "cfg4"])
def test_overlap_single_errors_corrected_downstream(runner, cfg):
    """Forced errors on voters, per-replica encoders and decoders never reach outputs."""
    r = runner(cfg)
    space = enumerate_targets(cfg, "port", r.soc)
    picked = [b for b in space.blocks if b.name.startswith(("vote.", "enc.", "dec.")) and b.name != "vote.busy"]
    assert picked
    for b in picked:
        for bit in sorted({0, b.width // 2, b.width - 1}):
            for t in (300, 1000, 2500):
                o = r.run(FaultSpec(FaultTarget(b.name, "net", "x", b.ref, bit), t))
                assert o.cls in ("Masked", "Corrected"), (b.name, bit, t, o)


def test_snapshot_restore_roundtrip():
    soc = Soc("cfg1")
    soc.reset()
    for _ in range(100):
        soc.step()
    snap = soc.snapshot()
    outs = [soc.step() for _ in range(50)]
    soc.restore(snap)
    assert [soc.step() for _ in range(50)] == outs
