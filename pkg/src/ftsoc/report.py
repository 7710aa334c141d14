"""Area estimation, Pareto analysis and report files.

The area model is linear in structure counted from an instantiated SoC:
register bits, SRAM data and check bits, voter bits, codec instances and
logic blocks.  Coefficients are gate equivalents (GE).

CSV schemas
-----------
``pareto.csv``
    config, scenario, area_kge, n, masked, corrected, uncorrectable, latent,
    failure, tolerance, pareto
    (fractions in [0, 1]; ``tolerance`` = 1 - failure; ``pareto`` is 1 when the
    configuration sits on the front)
``summary.csv``
    config, scenario, n, then one count column per outcome class
``plot_data.json``
    ``stacked``: scenario -> config -> class fractions;
    ``area_tolerance``: one point per configuration;
    ``reference`` (optional): published reference values.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .config import ALL_CONFIGS, SocConfig
from .faultsim import CLASSES, CampaignResult
from .soc import Soc

PARETO_SCENARIOS = ("ff_excl",)


@dataclass(frozen=True)
class AreaModel:
    register_bit: float = 8.0
    sram_data_bit: float = 1.5
    sram_ecc_bit: float = 1.5
    voter_bit: float = 4.0
    codec: float = 350.0
    core_logic: float = 4000.0
    periph_logic: float = 800.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"area coefficient {f.name} must be positive")

    def scaled(self, **factors) -> "AreaModel":
        return replace(self, **{k: getattr(self, k) * v for k, v in factors.items()})


@dataclass
class AreaEstimate:
    config: str
    counts: dict
    breakdown: dict  # component -> GE

    @property
    def total(self) -> float:
        return sum(self.breakdown.values())

    @property
    def kge(self) -> float:
        return self.total / 1000.0


def structure_counts(config) -> dict:
    """Count the structural elements the area model charges for."""
    soc = config if isinstance(config, Soc) else Soc(config)
    cfg = soc.cfg
    reg = soc.reg
    reg_bits = sum(f.width for f in reg.fields)
    data_bits = ecc_bits = 0
    for ctl in soc.banks:
        copies = len(ctl.sram.arrays)
        data_bits += 32 * ctl.words * copies
        if ctl.sram.mode == "ecc":
            ecc_bits += 7 * ctl.words
    # group voters are themselves triplicated, one per replica
    grouped = {i for g in reg.groups for i in g.members}
    voter_bits = 3 * sum(f.width for f in reg.fields if f.index in grouped)
    codecs = 0
    for n in soc.nets:
        last = n.name.split(".")
        if n.name.startswith("vote.") or last[0] == "irq":
            voter_bits += n.width
        if any(p in ("enc", "dec", "rmw_dec") for p in last) or last[0] in ("enc", "dec"):
            codecs += 1
    if cfg.tmrg:
        voter_bits += 32 * len(soc.banks)  # read-data voters behind the triplicated arrays
    cores = 3 if (cfg.tcls or cfg.tmrg) else 1
    periph = 3 if (cfg.tmr_periph or cfg.tmrg) else 1
    return {"register_bits": reg_bits, "sram_data_bits": data_bits, "sram_ecc_bits": ecc_bits,
            "voter_bits": voter_bits, "codecs": codecs, "core_blocks": cores, "periph_blocks": periph}


def estimate_area(config, model: AreaModel | None = None) -> AreaEstimate:
    m = model or AreaModel()
    c = structure_counts(config)
    name = config.cfg.name if isinstance(config, Soc) else SocConfig.of(config).name
    breakdown = {
        "registers": c["register_bits"] * m.register_bit,
        "sram_data": c["sram_data_bits"] * m.sram_data_bit,
        "sram_ecc": c["sram_ecc_bits"] * m.sram_ecc_bit,
        "voters": c["voter_bits"] * m.voter_bit,
        "codecs": c["codecs"] * m.codec,
        "core_logic": c["core_blocks"] * m.core_logic,
        "periph_logic": c["periph_blocks"] * m.periph_logic,
    }
    return AreaEstimate(name, c, breakdown)


# ---------------------------------------------------------------------------
# Pareto analysis


@dataclass(frozen=True)
class ParetoPoint:
    config: str
    area: float  # kGE
    tolerance: dict = field(default_factory=dict)  # scenario -> non-failure fraction

    def __post_init__(self):
        for k, v in self.tolerance.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"tolerance for {k} outside [0, 1]: {v}")

    def dominates(self, other: "ParetoPoint") -> bool:
        keys = self.tolerance.keys() & other.tolerance.keys()
        if self.area > other.area:
            return False
        if any(self.tolerance[k] < other.tolerance[k] for k in keys):
            return False
        return self.area < other.area or any(self.tolerance[k] > other.tolerance[k] for k in keys)


def pareto_front(points) -> list[ParetoPoint]:
    """Points not dominated by any other, ordered by area then name."""
    pts = list(points)
    if not pts:
        raise ValueError("pareto_front needs at least one point")
    front = [p for p in pts if not any(q.dominates(p) for q in pts if q is not p)]
    return sorted(front, key=lambda p: (p.area, p.config))


# ---------------------------------------------------------------------------
# Campaign summaries and report emission


@dataclass
class CampaignSummary:
    config: str
    scenario: str
    counts: dict

    @property
    def n(self) -> int:
        return sum(self.counts.values())

    def fractions(self) -> dict:
        n = max(1, self.n)
        return {c: self.counts.get(c, 0) / n for c in CLASSES}

    @property
    def tolerance(self) -> float:
        return 1.0 - self.fractions()["Failure"]

    @classmethod
    def of(cls, item) -> "CampaignSummary":
        if isinstance(item, CampaignSummary):
            return item
        if isinstance(item, CampaignResult):
            p = item.plan
            return cls(p.config.name, p.scenario + ("_sram" if p.sram_only else ""), item.histogram())
        raise TypeError(f"cannot summarize {type(item).__name__}")

    @classmethod
    def load(cls, path) -> "CampaignSummary":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise OSError(f"{path}: {exc}") from exc
        plan = doc["plan"]
        scen = plan["scenario"] + ("_sram" if plan.get("sram_only") else "")
        return cls(plan["config"]["protection"], scen, doc["counts"])


def load_reference() -> dict:
    """Published reference values shipped with the package (qualitative comparison only)."""
    text = resources.files("ftsoc").joinpath("data/reference_values.json").read_text()
    return json.loads(text)


def pareto_points(summaries, areas: dict, scenarios=PARETO_SCENARIOS) -> list[ParetoPoint]:
    tol: dict = {}
    for s in summaries:
        if s.scenario in scenarios:
            tol.setdefault(s.config, {})[s.scenario] = s.tolerance
    return [ParetoPoint(c, areas[c].kge, t) for c, t in tol.items() if c in areas]


_ORDER = {p.value: i for i, p in enumerate(ALL_CONFIGS)}

PARETO_HEADER = ["config", "scenario", "area_kge", "n", *(c.lower() for c in CLASSES), "tolerance", "pareto"]


def emit_reports(campaigns, areas: dict | None, out_dir, reference: bool = False) -> dict:
    """Write ``pareto.csv``, ``summary.csv`` and ``plot_data.json`` into ``out_dir``.

    ``areas`` maps config name to :class:`AreaEstimate`; missing entries are
    estimated with the default model.  Returns the written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    sums = sorted((CampaignSummary.of(c) for c in campaigns),
                  key=lambda s: (_ORDER.get(s.config, 99), s.scenario))
    areas = dict(areas or {})
    for s in sums:
        if s.config not in areas:
            areas[s.config] = estimate_area(s.config)
    points = pareto_points(sums, areas)
    front = {p.config for p in pareto_front(points)} if points else set()

    paths = {}
    p = out / "pareto.csv"
    with _open(p) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PARETO_HEADER)
        for s in sums:
            fr = s.fractions()
            w.writerow([s.config, s.scenario, f"{areas[s.config].kge:.3f}", s.n,
                        *(f"{fr[c]:.6f}" for c in CLASSES), f"{s.tolerance:.6f}",
                        int(s.config in front)])
    paths["pareto"] = p

    p = out / "summary.csv"
    with _open(p) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config", "scenario", "n", *CLASSES])
        for s in sums:
            w.writerow([s.config, s.scenario, s.n, *(s.counts.get(c, 0) for c in CLASSES)])
    paths["summary"] = p

    stacked: dict = {}
    for s in sums:
        stacked.setdefault(s.scenario, {})[s.config] = s.fractions()
    doc = {
        "stacked": stacked,
        "area_tolerance": [{"config": q.config, "area_kge": round(q.area, 3), "tolerance": q.tolerance,
                            "pareto": q.config in front}
                           for q in sorted(points, key=lambda q: _ORDER.get(q.config, 99))],
        "areas": {c: {"kge": round(a.kge, 3), "breakdown": a.breakdown}
                  for c, a in sorted(areas.items(), key=lambda kv: _ORDER.get(kv[0], 99))},
    }
    if reference:
        doc["reference"] = load_reference()
    p = out / "plot_data.json"
    with _open(p) as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    paths["plot_data"] = p
    return paths


def _open(path: Path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
