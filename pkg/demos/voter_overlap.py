"""Single-cycle flips on voter and ECC-decoder outputs (PORT faults).

Without overlap (cfg2) the lockstep voters sit on the raw bus and the ECC
decoders sit at the banks, so a flipped voter or decoder output reaches the
memory or the core unchecked.  With overlap (cfg3) the encoders and decoders
move inside each core replica and the voters compare codewords, so the same
flips are either corrected by ECC or outvoted.  The remaining single point is
the busy pin voter.
"""

import sys

from ftsoc.faultsim import CampaignPlan, run_campaign

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
for cfg in ("cfg2", "cfg3"):
    res = run_campaign(CampaignPlan(cfg, "port", n, master_seed=3))
    fr = res.fractions()
    print(f"{cfg}: " + ", ".join(f"{k} {v:.1%}" for k, v in fr.items()))
    nets = sorted({f.target.id.rsplit(".", 1)[0] for f, _ in res.failures()})
    print(f"  nets behind failures: {', '.join(nets[:8])}{' ...' if len(nets) > 8 else ''}")
