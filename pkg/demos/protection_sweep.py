"""Small FF-excl campaigns across all configurations, with area and Pareto front.

Uses a few hundred injections per configuration so it finishes in a couple of
minutes; the CLI ``study`` command runs the full-size version.
"""

import sys

from ftsoc import ALL_CONFIGS
from ftsoc.faultsim import CLASSES, CampaignPlan, run_campaign
from ftsoc.report import CampaignSummary, estimate_area, pareto_front, pareto_points

n = int(sys.argv[1]) if len(sys.argv) > 1 else 300
configs = [c.value for c in ALL_CONFIGS]

summaries = []
print(f"{'config':6s} {'kGE':>7s} " + " ".join(f"{c:>13s}" for c in CLASSES))
areas = {c: estimate_area(c) for c in configs}
for cfg in configs:
    res = run_campaign(CampaignPlan(cfg, "ff_excl", n, master_seed=7))
    summaries.append(CampaignSummary.of(res))
    fr = res.fractions()
    print(f"{cfg:6s} {areas[cfg].kge:7.1f} " + " ".join(f"{fr[c]:13.1%}" for c in CLASSES))

front = pareto_front(pareto_points(summaries, areas))
print("pareto front:", ", ".join(f"{p.config} ({p.area:.0f} kGE)" for p in front))
