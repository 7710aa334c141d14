"""Command-line entry point: ``ftsoc <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from . import __version__
from .config import ALL_CONFIGS, SocConfig
from .faultsim import (CampaignPlan, CampaignResult, ConfigurationError, FaultSpec, HarnessError,
                       Runner, enumerate_targets, load_plan, parse_scenario, run_campaign, run_golden)
from .peripherals import decode_uart, write_pin_trace
from .report import CampaignSummary, emit_reports, estimate_area
from .soc import Soc
from .workload import ImageError, load_image

log = logging.getLogger("ftsoc")

OUT_ENV = "FTSOC_OUT"
DESK_N = 10_000
FULL_N = 100_000
STUDY_SCENARIOS = ("ff_all", "ff_excl", "set")
PORT_CONFIGS = ("cfg2", "cfg3", "cfg4")


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "ftsoc-out")


def _n(args) -> int:
    if args.full_scale:
        return FULL_N
    return DESK_N if args.n is None else args.n


def _progress(label):
    def cb(done, total):
        log.info("%s: %d/%d", label, done, total)
    return cb


# ---------------------------------------------------------------------------


def cmd_run_golden(args) -> int:
    cfg = SocConfig.of(args.config)
    program = load_image(args.image) if args.image else None
    soc = Soc(cfg, program)
    g = run_golden(cfg, soc, keep_trace=True)
    out = _out_dir(args) / "golden" / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    write_pin_trace(out / "trace.csv", ((i, o[0], o[1], o[2], o[3]) for i, o in enumerate(g.trace)))
    for b, ctl in enumerate(soc.banks):
        (out / f"bank{b}.mem").write_text("\n".join(ctl.sram.dump()) + "\n")
    uart = decode_uart([o[0] for o in g.trace], cfg.uart_divider)
    info = {"config": cfg.name, "cycles": g.length, "setup_cycle": g.setup,
            "retval": f"{g.retval:#010x}", "status_ok": g.status_ok,
            "uart": uart.decode("latin-1")}
    (out / "golden.json").write_text(json.dumps(info, indent=2) + "\n")
    print(f"{cfg.name}: {g.length} cycles, retval {g.retval:#010x}, uart {uart!r} -> {out}")
    return 0 if g.status_ok else 1


def cmd_inject_one(args) -> int:
    cfg = SocConfig.of(args.config)
    runner = Runner(cfg)
    space = enumerate_targets(cfg, args.scenario, runner.soc)
    if args.target is not None:
        idx = space.find(args.target)
    else:
        idx = args.index
    if not 0 <= idx < len(space):
        raise ConfigurationError(f"target index {idx} outside 0..{len(space) - 1}")
    cyc = args.cycle if args.cycle is not None else runner.golden.setup
    fault = FaultSpec(space[idx], cyc)
    o = runner.run(fault)
    print(json.dumps({"config": cfg.name, "target": fault.target.id, "cycle": cyc, "class": o.cls,
                      "first_divergence": o.first_divergence, "termination": o.termination,
                      "monitor": o.monitor, "mem_diff": o.mem_diff, "raw_diff": o.raw_diff}, indent=2))
    return 0


def _campaign_dir(root: Path, plan: CampaignPlan) -> Path:
    return root / "campaigns" / plan.config.name / (plan.scenario + ("_sram" if plan.sram_only else ""))


def _run_and_write(plan: CampaignPlan, root: Path, workers: int) -> CampaignResult:
    res = run_campaign(plan, workers, _progress(plan.label))
    d = _campaign_dir(root, plan)
    d.mkdir(parents=True, exist_ok=True)
    (d / "plan.yaml").write_text(yaml.safe_dump(plan.to_dict(), sort_keys=True))
    res.write(d)
    return res


def cmd_campaign(args) -> int:
    if args.plan:
        plans = load_plan(args.plan)
        if args.n is not None or args.full_scale:
            plans = [CampaignPlan(p.config, p.scenario, _n(args), p.master_seed, p.sram_only) for p in plans]
    else:
        if not args.config:
            raise ConfigurationError("campaign needs --config or --plan")
        plans = [CampaignPlan(SocConfig.of(args.config), args.scenario, _n(args), args.seed, args.sram_only)]
    root = _out_dir(args)
    for plan in plans:
        res = _run_and_write(plan, root, args.workers)
        fr = ", ".join(f"{k} {v:.2%}" for k, v in res.fractions().items())
        print(f"{plan.label} n={plan.n_injections}: {fr}")
    return 0


def study_plans(n: int, seed: int, configs=None) -> list[CampaignPlan]:
    configs = configs or [c.value for c in ALL_CONFIGS]
    plans = []
    for c in configs:
        for sc in STUDY_SCENARIOS:
            plans.append(CampaignPlan(SocConfig.of(c), sc, n, seed))
        if c in PORT_CONFIGS:
            plans.append(CampaignPlan(SocConfig.of(c), "port", n, seed))
    return plans


def _complete(d: Path, plan: CampaignPlan) -> bool:
    h = d / "histogram.json"
    if not (h.exists() and (d / "faults.csv").exists()):
        return False
    try:
        return json.loads(h.read_text())["plan"] == plan.to_dict()
    except (ValueError, KeyError):
        return False


def cmd_study(args) -> int:
    root = _out_dir(args)
    configs = args.config.split(",") if args.config else None
    plans = study_plans(_n(args), args.seed, configs)
    failed = []
    for plan in plans:
        d = _campaign_dir(root, plan)
        if _complete(d, plan):
            log.info("%s already complete, skipping", plan.label)
            continue
        try:
            _run_and_write(plan, root, args.workers)
            print(f"{plan.label}: done")
        except Exception as exc:  # isolate to this campaign
            log.error("%s failed: %s", plan.label, exc)
            failed.append(plan.label)
    _report(root, reference=True)
    if failed:
        print("failed campaigns: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def _report(root: Path, reference: bool) -> dict:
    sums = [CampaignSummary.load(h) for h in sorted((root / "campaigns").glob("*/*/histogram.json"))]
    configs = {s.config for s in sums} or {c.value for c in ALL_CONFIGS}
    areas = {c: estimate_area(c) for c in configs}
    paths = emit_reports(sums, areas, root / "report", reference=reference)
    for k, p in paths.items():
        print(f"{k}: {p}")
    return paths


def cmd_report(args) -> int:
    _report(_out_dir(args), args.reference)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ftsoc", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="cfg0..cfg4 or tmrg")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./ftsoc-out)")

    def campaign_opts(p):
        p.add_argument("--n", type=int, help=f"injections per campaign (default {DESK_N})")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--full-scale", action="store_true", help=f"use {FULL_N} injections")

    p = sub.add_parser("run-golden", help="fault-free reference run")
    common(p, True)
    p.add_argument("--image", help="workload image file (default: built-in workload)")
    p.set_defaults(func=cmd_run_golden)

    p = sub.add_parser("inject-one", help="inject a single fault")
    common(p, True)
    p.add_argument("--scenario", default="ff_all")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--target", help="target id, e.g. state:core.r3.7")
    g.add_argument("--index", type=int, help="target index within the scenario")
    p.add_argument("--cycle", type=int, help="injection cycle (default: end of setup)")
    p.set_defaults(func=cmd_inject_one)

    p = sub.add_parser("campaign", help="run one campaign or a YAML plan")
    common(p)
    p.add_argument("--scenario", default="ff_all")
    p.add_argument("--plan", help="YAML plan file")
    p.add_argument("--sram-only", action="store_true", help="restrict targets to SRAM bits")
    campaign_opts(p)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("study", help="all configurations and scenarios, then reports (resumable)")
    common(p)
    campaign_opts(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("report", help="areas, Pareto front and plot data from finished campaigns")
    common(p)
    p.add_argument("--reference", action="store_true", help="include published reference values")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return 2
    if getattr(args, "scenario", None):
        try:
            args.scenario = parse_scenario(args.scenario)
        except ConfigurationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (ConfigurationError, ImageError, FileNotFoundError, KeyError, ValueError, HarnessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
