"""Run the reference workload and inject a few hand-picked faults.

The same upsets (a flipped program-counter bit, then a flipped bit in an SRAM
word the program never touches) are shown on the unprotected SoC and on the
fully protected one.
"""

from ftsoc.faultsim import FaultSpec, Runner, enumerate_targets, run_golden
from ftsoc.peripherals import decode_uart

for cfg in ("cfg0", "cfg4"):
    runner = Runner(cfg)
    g = runner.golden
    print(f"{cfg}: golden {g.length} cycles, active window {g.window}, retval {g.retval:#010x}")

cases = {
    "cfg0": ["state:core.pc.4", "sram:bank1[1000].3"],
    "cfg4": ["state:core.r0.pc.4", "sram:bank1[1000].3"],
}
for cfg, ids in cases.items():
    runner = Runner(cfg)
    space = enumerate_targets(cfg, "ff_all", runner.soc)
    for tid in ids:
        fault = FaultSpec(space[space.find(tid)], runner.golden.setup + 400)
        o = runner.run(fault)
        print(f"  {cfg} {tid:24s} @ {fault.cycle}: {o.cls:13s} "
              f"divergence={o.first_divergence} tallies={o.monitor}")

# the UART stream decoded from the golden pin trace
g = run_golden("cfg0", keep_trace=True)
print("uart:", decode_uart([o[0] for o in g.trace], 16))
