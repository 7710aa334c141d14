import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from ftsoc import ecc
from ftsoc.faultsim import (CampaignPlan, ConfigurationError, FaultSpec, FaultTarget, classify,
                            enumerate_targets, load_plan, parse_scenario, run_campaign, sample_faults,
                            sram_targets_only)
from ftsoc.redundancy import majority
from ftsoc.soc import F_UNC, Soc


# ---------------------------------------------------------------------------
# brute-force oracle: full run to the end, no checkpoints, no early exit


def brute_force(cfg, golden, fault):
    soc = Soc(cfg)
    soc.reset()
    while soc.cycle < fault.cycle:
        soc.step()
    tg = fault.target
    mask = 1 << tg.bit
    if tg.kind == "state":
        soc.s[tg.ref] ^= mask
    elif tg.kind == "sram":
        a, i = tg.ref
        soc.arrays[a][i] ^= mask
    tap = (tg.ref, mask) if tg.kind == "net" else None
    if tap and soc.cfg.tmrg and soc.nets[tg.ref].replica >= 0:
        out, fl = soc.step_copy(tap, soc.nets[tg.ref].replica)
    else:
        out, fl = soc.step(tap)
    if tg.kind in ("dinput", "voter"):
        soc.s[tg.ref] ^= mask
    tallies = [0] * 5
    t = fault.cycle
    while True:
        if soc.cfg.monitor:
            tallies = [x + y for x, y in zip(tallies, fl)]
        if tallies[F_UNC]:
            return "Uncorrectable"
        if out != golden.outputs[t]:
            return "Failure"
        t += 1
        if t >= golden.length:
            break
        out, fl = soc.step()

    def word(arrays, ctl, i):
        a = ctl.aid
        if ctl.sram.mode == "ecc":
            return ecc.decode_fast(arrays[a][i])[0]
        if ctl.sram.mode == "triple":
            return majority(arrays[a][i], arrays[a + 1][i], arrays[a + 2][i])
        return arrays[a][i]

    diff = any(word(soc.arrays, c, i) != word(golden.final, c, i) for c in soc.banks for i in range(c.words))
    return classify(False, int(diff), tallies)


@pytest.mark.parametrize("cfg,scenario", [("cfg0", "ff_excl"), ("cfg1", "ff_all"), ("cfg2", "set"),
                                          ("cfg3", "ff_excl"), ("tmrg", "set"), ("cfg1", "port")])
def test_harness_agrees_with_brute_force(runner, cfg, scenario):
    r = runner(cfg)
    plan = CampaignPlan(cfg, scenario, 12, 99)
    faults = sample_faults(plan, enumerate_targets(cfg, scenario, r.soc), r.golden)
    for f in faults:
        assert r.run(f).cls == brute_force(cfg, r.golden, f), f


def test_harness_agrees_on_sram_skip_ahead(runner):
    r = runner("cfg0")
    plan = CampaignPlan("cfg0", "ff_all", 15, 3, sram_only=True)
    space = sram_targets_only(enumerate_targets("cfg0", "ff_all", r.soc))
    # bias towards the program and data region so that accesses happen
    faults = [FaultSpec(space[int(i)], int(c)) for i, c in
              zip(np.random.default_rng(4).integers(0, 4096, 15), np.random.default_rng(5).integers(16, 5000, 15))]
    faults += [FaultSpec(space[65536 + 32 * 20 + 3], 1500), FaultSpec(space[65536 + 32 * 16 + 1], 400)]
    for f in faults:
        assert r.run(f).cls == brute_force("cfg0", r.golden, f), f


# ---------------------------------------------------------------------------


def test_target_counts():
    s0 = Soc("cfg0")
    bits = sum(f.width for f in s0.reg.fields)
    assert len(enumerate_targets("cfg0", "ff_all", s0)) == bits + 2 * 2048 * 32
    assert len(enumerate_targets("cfg0", "ff_excl", s0)) == bits
    s1 = Soc("cfg1")
    assert len(sram_targets_only(enumerate_targets("cfg1", "ff_all", s1))) == 2 * 2048 * 39
    st_ = Soc("tmrg")
    assert len(sram_targets_only(enumerate_targets("tmrg", "ff_all", st_))) == 3 * 2 * 2048 * 32
    with pytest.raises(ConfigurationError):
        enumerate_targets("cfg0", "port")
    with pytest.raises(ConfigurationError):
        enumerate_targets("tmrg", "port")


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_target_find_roundtrip(data):
    cfg = data.draw(st.sampled_from(["cfg1", "cfg4", "tmrg"]))
    sc = data.draw(st.sampled_from(["ff_all", "set"]))
    space = _space(cfg, sc)
    i = data.draw(st.integers(0, len(space) - 1))
    assert space.find(space[i].id) == i


_SPACES = {}


def _space(cfg, sc):
    if (cfg, sc) not in _SPACES:
        _SPACES[cfg, sc] = enumerate_targets(cfg, sc)
    return _SPACES[cfg, sc]


def test_scenario_names():
    assert parse_scenario("FF-excl-SRAM") == "ff_excl"
    assert parse_scenario("PORT") == "port"
    with pytest.raises(ConfigurationError):
        parse_scenario("laser")


def _dead_word(r):
    """A bank-1 word the workload never touches (index 1000)."""
    soc = r.soc
    return soc.banks[1].aid, 1000


def test_dead_sram_word_latent_vs_corrected(runner):
    r0 = runner("cfg0")
    a, i = _dead_word(r0)
    o = r0.run(FaultSpec(FaultTarget("x", "sram", "sram", (a, i), 5), 200))
    assert o.cls == "Latent" and o.mem_diff == 1

    r1 = runner("cfg1")
    a, i = _dead_word(r1)
    o = r1.run(FaultSpec(FaultTarget("x", "sram", "sram", (a, i), 5), 200))
    assert o.cls == "Corrected" and o.monitor["ecc_corr"] >= 1

    o = r1.run(FaultSpec(FaultTarget("x", "sram", "sram", (a, i), 5), 200, extra_bits=(30,)))
    assert o.cls == "Uncorrectable"


def test_tmrg_sram_replica_flip_persists(runner):
    r = runner("tmrg")
    soc = r.soc
    a = soc.banks[1].aid + 2
    o = r.run(FaultSpec(FaultTarget("x", "sram", "sram", (a, 1000), 7), 300))
    assert o.cls == "Masked" and o.raw_diff == 1 and o.mem_diff == 0


def test_uart_pin_divergence_is_failure(runner):
    r = runner("cfg1")
    net = r.soc.net("pin.uart_tx")
    o = r.run(FaultSpec(FaultTarget("x", "net", "pin", net, 0), 777))
    assert o.cls == "Failure" and o.first_divergence == 777


def test_monitor_counter_flip_is_masked(runner):
    r = runner("cfg3")
    idx = r.soc.reg.index("monitor.count.core")
    o = r.run(FaultSpec(FaultTarget("x", "state", "monitor", idx, 3), 100))
    assert o.cls == "Masked"


def test_classify_precedence():
    z = [0] * 5
    assert classify(False, 0, z) == "Masked"
    assert classify(True, 0, z) == "Failure"
    assert classify(False, 1, z) == "Latent"
    assert classify(False, 0, [0, 1, 0, 0, 0]) == "Corrected"
    assert classify(False, 0, [0, 0, 1, 0, 0]) == "Uncorrectable"
    assert classify(True, 1, [1, 1, 1, 0, 0]) == "Uncorrectable"
    assert classify(False, 0, z, "timeout") == "Failure"


def test_sampling_deterministic_and_in_window(runner):
    r = runner("cfg2")
    plan = CampaignPlan("cfg2", "ff_excl", 300, 17)
    space = enumerate_targets("cfg2", "ff_excl", r.soc)
    a = sample_faults(plan, space, r.golden)
    b = sample_faults(plan, space, r.golden)
    assert a == b
    lo, hi = r.golden.window
    assert all(lo <= f.cycle < hi for f in a)
    # prefix property: fault i does not depend on n
    c = sample_faults(CampaignPlan("cfg2", "ff_excl", 50, 17), space, r.golden)
    assert c == a[:50]


def test_campaign_repeatable_and_worker_independent():
    plan = CampaignPlan("cfg1", "set", 60, 5)
    a = run_campaign(plan, workers=1)
    b = run_campaign(plan, workers=3)
    assert a.faults_csv() == b.faults_csv()
    assert a.histogram_json() == b.histogram_json()
    assert sum(a.histogram().values()) == 60


def test_plan_yaml(tmp_path):
    p = tmp_path / "plan.yaml"
    p.write_text(yaml.safe_dump({"config": "cfg3", "scenario": "PORT", "n": 10, "seed": 4,
                                 "scrub_period": 2}))
    (plan,) = load_plan(p)
    assert plan.config.name == "cfg3" and plan.scenario == "port" and plan.n_injections == 10
    assert plan.config.scrub_period == 2
    p.write_text(yaml.safe_dump({"n": 5, "campaigns": [{"config": "cfg1"}, {"config": "cfg2", "seed": 9}]}))
    plans = load_plan(p)
    assert [q.master_seed for q in plans] == [1, 9] and all(q.n_injections == 5 for q in plans)
    p.write_text(yaml.safe_dump({"config": "cfg1", "bogus": 1}))
    with pytest.raises(ConfigurationError):
        load_plan(p)
    p.write_text(yaml.safe_dump({"scenario": "set"}))
    with pytest.raises(ConfigurationError):
        load_plan(p)


def test_faults_csv_schema():
    res = run_campaign(CampaignPlan("cfg0", "ff_excl", 5, 1))
    lines = res.faults_csv().splitlines()
    assert lines[0].split(",")[:6] == ["fault_id", "target", "kind", "cycle", "class", "first_divergence"]
    assert len(lines) == 6
