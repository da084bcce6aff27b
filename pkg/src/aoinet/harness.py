"""Scenario loading, experiment orchestration and report I/O."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Optional, Sequence

from .fate import LAC, LOU2020, MAX_THROUGHPUT, MIN_AOI, SolverConfig, SolverError, solve
from .model import ModelError, RateAllocation, flows_from_dicts, network_from_dict, validate_network
from .sim.engine import Scenario, SchedulerSpec, SimulationError, run, scheduler_name
from .sim.measure import MeasurementError
from .sim.sources import PACED, TrafficSpec, random_traffic

DEFAULT_LAMBDA = 0.125
CSV_COLUMNS = ("objective", "lambda", "scheduler", "seed", "total_lda_throughput_bps", "total_aoi_s", "status")
OBJECTIVES = (LAC, MAX_THROUGHPUT, MIN_AOI, LOU2020)
BUILTIN_TOPOLOGIES = ("b4", "swan", "internet2")

_OBJECTIVE_ALIASES = {
    "lac": LAC,
    "fate": LAC,
    "maxthroughput": MAX_THROUGHPUT,
    "minaoi": MIN_AOI,
    "lou2020": LOU2020,
    "lou": LOU2020,
}


class ScenarioError(ValueError):
    """A scenario document that cannot be turned into a valid Scenario."""


def objective_name(name: str) -> str:
    key = name.replace("_", "").replace("-", "").replace(" ", "").lower()
    try:
        return _OBJECTIVE_ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown objective: {name}") from None


def builtin_topology_path(name: str) -> str:
    if name not in BUILTIN_TOPOLOGIES:
        raise ScenarioError(f"unknown built-in topology: {name}")
    return str(resources.files("aoinet") / "data" / f"{name}.json")


# -- scenario documents ------------------------------------------------------


def _line_of(text: Optional[str], ident: str) -> Optional[int]:
    if not text:
        return None
    needle = json.dumps(ident)
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line and '"id"' in line:
            return i
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _with_line(msg: str, text: Optional[str]) -> str:
    ident = msg.rsplit(" ", 1)[-1]
    line = _line_of(text, ident)
    return f"line {line}: {msg}" if line else msg


def _scheduler_from(doc) -> SchedulerSpec:
    if doc is None:
        return SchedulerSpec()
    if isinstance(doc, str):
        return SchedulerSpec(doc)
    return SchedulerSpec(
        name=doc.get("name", "SDM"),
        frame_s=float(doc.get("frame_s", 1.0)),
        period_s=doc.get("period_s"),
        gamma=doc.get("gamma"),
    )


def scenario_from_dict(doc: dict, base_dir: str = ".", text: Optional[str] = None) -> Scenario:
    """Build and validate a Scenario from a parsed JSON document."""
    try:
        topo = doc.get("topology")
        if isinstance(topo, str):
            path = builtin_topology_path(topo) if topo in BUILTIN_TOPOLOGIES else os.path.join(base_dir, topo)
            with open(path) as fh:
                tdoc = json.load(fh)
            net = network_from_dict(tdoc)
        else:
            net = network_from_dict(topo if isinstance(topo, dict) else doc)
        flows = flows_from_dicts(net, doc.get("flows", []))
        traffic = None
        if "traffic" in doc:
            t = doc["traffic"]
            traffic = TrafficSpec(
                pair_prob=float(t.get("pair_prob", 0.1)),
                lda_size_bits=float(t.get("lda_size_bits", 1.0)),
                aoi_size_bits=float(t.get("aoi_size_bits", 1.0)),
            )
        allocation = RateAllocation.from_dict(doc["allocation"]) if "allocation" in doc else None
        objective = doc.get("objective")
        lam = doc.get("lambda")
        if lam is not None and objective is None and allocation is None:
            raise ScenarioError("objective required when lambda is given")
        if objective is not None:
            objective = objective_name(objective)
        problems = validate_network(net, flows)
        if problems:
            raise ScenarioError("; ".join(_with_line(p, text) for p in problems))
        return Scenario(
            network=net,
            flows=tuple(flows),
            scheduler=_scheduler_from(doc.get("scheduler")),
            duration_s=float(doc.get("duration_s", 100.0)),
            warmup_s=None if doc.get("warmup_s") is None else float(doc["warmup_s"]),
            seed=int(doc.get("seed", 0)),
            allocation=allocation,
            objective=objective,
            lam=None if lam is None else float(lam),
            lda_mode=doc.get("lda_mode", PACED),
            greedy_window=int(doc.get("greedy_window", 1)),
            fifo_max_packets=float(doc.get("fifo_max_packets", 100)),
            ifil_move_to_back=bool(doc.get("ifil_move_to_back", False)),
            random_phase=bool(doc.get("random_phase", False)),
            s_lda_bits=float(doc.get("s_lda_bits", 1.0)),
            traffic=traffic,
        )
    except ScenarioError:
        raise
    except (ModelError, ValueError, TypeError, KeyError) as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    return scenario_from_dict(doc, os.path.dirname(os.path.abspath(path)), text)


# -- sweeps -------------------------------------------------------------------


@dataclass
class CurveRow:
    objective: str
    lam: float
    scheduler: str
    seed: int
    total_lda_throughput_bps: float = math.nan
    total_aoi_s: float = math.nan
    status: str = "ok"
    reason: str = ""
    per_flow: dict = field(default_factory=dict)

    def key(self):
        return (self.objective, self.lam, self.scheduler, self.seed)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "lambda": self.lam,
            "scheduler": self.scheduler,
            "seed": self.seed,
            "total_lda_throughput_bps": None if math.isnan(self.total_lda_throughput_bps) else self.total_lda_throughput_bps,
            "total_aoi_s": None if math.isnan(self.total_aoi_s) else self.total_aoi_s,
            "status": self.status,
            "reason": self.reason,
            "per_flow": self.per_flow,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CurveRow":
        def num(v):
            return math.nan if v in (None, "") else float(v)

        return cls(
            objective=d["objective"],
            lam=float(d["lambda"]),
            scheduler=d["scheduler"],
            seed=int(d["seed"]),
            total_lda_throughput_bps=num(d.get("total_lda_throughput_bps")),
            total_aoi_s=num(d.get("total_aoi_s")),
            status=d.get("status", "ok"),
            reason=d.get("reason", ""),
            per_flow=dict(d.get("per_flow", {})),
        )


@dataclass
class TradeoffCurve:
    rows: list[CurveRow] = field(default_factory=list)

    def sorted(self) -> "TradeoffCurve":
        return TradeoffCurve(sorted(self.rows, key=CurveRow.key))

    def select(self, objective=None, scheduler=None, lam=None) -> list[CurveRow]:
        return [
            r
            for r in self.rows
            if (objective is None or r.objective == objective)
            and (scheduler is None or r.scheduler == scheduler)
            and (lam is None or r.lam == lam)
        ]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "TradeoffCurve":
        return cls([CurveRow.from_dict(r) for r in d.get("rows", [])])


@dataclass(frozen=True)
class SweepSpec:
    scenario: Scenario
    lambdas: tuple[float, ...]
    schedulers: tuple[str, ...] = ("SDM",)
    objectives: tuple[str, ...] = (LAC,)
    seeds: tuple[int, ...] = (0,)
    pair_prob: Optional[float] = None
    pairs: Optional[tuple[tuple[str, str], ...]] = None
    workers: int = 1

    def __post_init__(self):
        if not self.lambdas:
            raise ValueError("lambda list must not be empty")
        if any(not l >= 0 for l in self.lambdas):
            raise ValueError("lambda values must be >= 0")
        if self.pair_prob is not None and not 0 <= self.pair_prob <= 1:
            raise ValueError("pair probability must lie in [0, 1]")
        if not self.seeds:
            raise ValueError("seed list must not be empty")
        object.__setattr__(self, "schedulers", tuple(scheduler_name(s) for s in self.schedulers))
        object.__setattr__(self, "objectives", tuple(objective_name(o) for o in self.objectives))
        if self.pairs is not None:
            object.__setattr__(self, "pairs", tuple((objective_name(o), scheduler_name(s)) for o, s in self.pairs))

    def jobs(self) -> list[tuple[str, float, str, int]]:
        combos = self.pairs or tuple((o, s) for o in self.objectives for s in self.schedulers)
        return sorted({(o, lam, s, seed) for o, s in combos for lam in self.lambdas for seed in self.seeds})


def _traffic_for(sc: Scenario, pair_prob: Optional[float]) -> Optional[TrafficSpec]:
    if pair_prob is not None:
        base = sc.traffic or TrafficSpec()
        return replace(base, pair_prob=pair_prob)
    return sc.traffic if not sc.flows else None


def run_row(sc: Scenario, objective: str, lam: float, scheduler: str, seed: int, pair_prob: Optional[float] = None) -> CurveRow:
    """Solve, simulate and measure one (objective, lambda, scheduler, seed) combination."""
    row = CurveRow(objective, lam, scheduler, seed)
    try:
        traffic = _traffic_for(sc, pair_prob)
        flows = random_traffic(sc.network, traffic, seed) if traffic is not None else list(sc.flows)
        cfg = SolverConfig(lam=lam if objective == LAC else 0.0)
        alloc = solve(objective, sc.network, flows, cfg, s_lda=sc.s_lda_bits)
        spec = replace(sc.scheduler, name=scheduler)
        rep = run(replace(sc, flows=tuple(flows), allocation=alloc, scheduler=spec, seed=seed, traffic=None, objective=None))
    except (SolverError, SimulationError, MeasurementError, ModelError, ValueError) as exc:
        row.status = "failed"
        row.reason = f"{type(exc).__name__}: {exc}"
        return row
    per_flow = {}
    per_flow.update({k: {"class": "AoI", "aoi_s": v} for k, v in rep.aoi_s.items()})
    per_flow.update({k: {"class": "LDA", "throughput_bps": v} for k, v in rep.throughput_bps.items()})
    row.per_flow = per_flow
    row.total_lda_throughput_bps = rep.total_lda_throughput_bps
    row.total_aoi_s = rep.total_aoi_s
    return row


def _row_job(args):
    return run_row(*args)


def run_sweep(spec: SweepSpec) -> TradeoffCurve:
    jobs = [(spec.scenario, o, lam, s, seed, spec.pair_prob) for o, lam, s, seed in spec.jobs()]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_row_job, jobs))
    else:
        rows = [_row_job(j) for j in jobs]
    return TradeoffCurve(rows).sorted()


def run_compare(
    scenario: Scenario,
    schedulers: Sequence[str] = ("SDM", "FIFO"),
    objectives: Sequence[str] = (LAC, MAX_THROUGHPUT),
    lam: float = DEFAULT_LAMBDA,
    seeds: Sequence[int] = (0,),
    pairs: Optional[Sequence[tuple[str, str]]] = None,
    pair_prob: Optional[float] = None,
    workers: int = 1,
) -> TradeoffCurve:
    """Cross product (or explicit pairs) of policies on identical traffic and seeds."""
    spec = SweepSpec(
        scenario,
        (lam,),
        tuple(schedulers),
        tuple(objectives),
        tuple(seeds),
        pair_prob=pair_prob,
        pairs=None if pairs is None else tuple(pairs),
        workers=workers,
    )
    return run_sweep(spec)


# -- reports -----------------------------------------------------------------


def _fmt(v: float) -> str:
    return "" if isinstance(v, float) and math.isnan(v) else repr(v)


def curve_csv(curve: TradeoffCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in curve.rows:
        w.writerow([r.objective, repr(r.lam), r.scheduler, r.seed, _fmt(r.total_lda_throughput_bps), _fmt(r.total_aoi_s), r.status])
    return buf.getvalue()


def curve_json(curve: TradeoffCurve) -> str:
    return json.dumps(curve.to_dict(), indent=2, sort_keys=True) + "\n"


def emit_report(curve: TradeoffCurve, fmt: str, path: Optional[str]) -> str:
    if fmt == "csv":
        text = curve_csv(curve)
    elif fmt == "json":
        text = curve_json(curve)
    else:
        raise ValueError(f"unknown format: {fmt}")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_report(path: str) -> TradeoffCurve:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return TradeoffCurve.from_dict(json.loads(text))
    rows = []
    for d in csv.DictReader(io.StringIO(text)):
        rows.append(CurveRow.from_dict(d))
    return TradeoffCurve(rows)


def table_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items() if k in columns})
    return buf.getvalue()
