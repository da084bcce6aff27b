"""Network, flow and allocation types shared by the solvers and the simulator.

Units are SI throughout: bits, seconds, bits/second.  A status update of an
AoI flow is a single packet of ``size_bits``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

LDA = "LDA"
AOI = "AoI"
FLOW_CLASSES = (LDA, AOI)


class ModelError(ValueError):
    """Raised for malformed networks, flows or topology documents."""


class NoRouteError(ModelError):
    pass


@dataclass(frozen=True)
class Link:
    id: str
    src: str
    dst: str
    capacity_bps: float
    latency_s: float = 0.0


@dataclass(frozen=True)
class Network:
    nodes: tuple[str, ...]
    links: tuple[Link, ...]

    @cached_property
    def link_by_id(self) -> dict[str, Link]:
        return {l.id: l for l in self.links}

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(sorted(self.nodes))}

    def link(self, link_id: str) -> Link:
        try:
            return self.link_by_id[link_id]
        except KeyError:
            raise ModelError(f"unknown link: {link_id}") from None

    def out_links(self, node: str) -> list[Link]:
        return [l for l in self.links if l.src == node]


@dataclass(frozen=True)
class FlowSpec:
    id: str
    cls: str
    path: tuple[str, ...]
    size_bits: float
    rate_bps: Optional[float] = None
    freq_hz: Optional[float] = None
    phase_s: float = 0.0

    @property
    def is_aoi(self) -> bool:
        return self.cls == AOI

    @property
    def hops(self) -> int:
        return len(self.path)

    @property
    def value(self) -> Optional[float]:
        """Allocated rate (LDA) or update frequency (AoI)."""
        return self.freq_hz if self.is_aoi else self.rate_bps

    def offered_bps(self) -> float:
        """Planned traffic this flow puts on each link of its path."""
        if self.is_aoi:
            return (self.freq_hz or 0.0) * self.size_bits
        return self.rate_bps or 0.0


@dataclass
class SolverDiagnostics:
    iterations: int = 0
    kkt_residual: float = 0.0
    duals: dict[str, float] = field(default_factory=dict)
    slack: dict[str, float] = field(default_factory=dict)
    epigraph: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "duals": dict(self.duals),
            "slack": dict(self.slack),
            "epigraph": dict(self.epigraph),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SolverDiagnostics":
        return cls(
            iterations=int(d.get("iterations", 0)),
            kkt_residual=float(d.get("kkt_residual", 0.0)),
            duals=dict(d.get("duals", {})),
            slack=dict(d.get("slack", {})),
            epigraph=dict(d.get("epigraph", {})),
            warnings=list(d.get("warnings", [])),
        )


@dataclass
class RateAllocation:
    """Per-flow rates/frequencies with the per-link loads and AoI ratios they imply."""

    values: dict[str, float]
    loads: dict[str, tuple[float, float]]
    gamma: dict[str, float]
    objective_value: float = 0.0
    lam: float = 0.0
    objective: str = ""
    diagnostics: SolverDiagnostics = field(default_factory=SolverDiagnostics)

    def value(self, flow_id: str) -> float:
        return self.values.get(flow_id, 0.0)

    def apply(self, flows: Sequence[FlowSpec]) -> list[FlowSpec]:
        """Return copies of ``flows`` carrying this allocation."""
        out = []
        for f in flows:
            v = self.value(f.id)
            out.append(replace(f, freq_hz=v) if f.is_aoi else replace(f, rate_bps=v))
        return out

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "lambda": self.lam,
            "objective_value": self.objective_value,
            "flows": [{"flow": k, "value": v} for k, v in self.values.items()],
            "links": [
                {"link": k, "s_lda_bps": a, "s_aoi_bps": b, "gamma": self.gamma.get(k, 1.0)}
                for k, (a, b) in self.loads.items()
            ],
            "diagnostics": self.diagnostics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RateAllocation":
        links = d.get("links", [])
        return cls(
            values={e["flow"]: float(e["value"]) for e in d.get("flows", [])},
            loads={e["link"]: (float(e["s_lda_bps"]), float(e["s_aoi_bps"])) for e in links},
            gamma={e["link"]: float(e["gamma"]) for e in links},
            objective_value=float(d.get("objective_value", 0.0)),
            lam=float(d.get("lambda", 0.0)),
            objective=d.get("objective", ""),
            diagnostics=SolverDiagnostics.from_dict(d.get("diagnostics", {})),
        )


def _path_violation(net: Network, f: FlowSpec) -> Optional[str]:
    if not f.path:
        return f"empty path: flow {f.id}"
    links = []
    for lid in f.path:
        if lid not in net.link_by_id:
            return f"unknown link {lid}: flow {f.id}"
        links.append(net.link_by_id[lid])
    for a, b in zip(links, links[1:]):
        if a.dst != b.src:
            return f"disconnected path: flow {f.id}"
    visited = [links[0].src] + [l.dst for l in links]
    if len(set(visited)) != len(visited):
        return f"repeated node on path: flow {f.id}"
    return None


def validate_network(net: Network, flows: Iterable[FlowSpec] = ()) -> list[str]:
    """Collect every invariant violation; never raises."""
    out: list[str] = []
    nodes = set(net.nodes)
    if len(nodes) != len(net.nodes):
        out.append("duplicate node ids")
    seen: set[str] = set()
    for l in net.links:
        if l.id in seen:
            out.append(f"duplicate link id: {l.id}")
        seen.add(l.id)
        if l.src not in nodes or l.dst not in nodes:
            out.append(f"dangling endpoint: {l.id}")
        if not l.capacity_bps > 0:
            out.append(f"non-positive capacity: {l.id}")
        if not l.latency_s >= 0:
            out.append(f"negative latency: {l.id}")
    fids: set[str] = set()
    for f in flows:
        if f.id in fids:
            out.append(f"duplicate flow id: {f.id}")
        fids.add(f.id)
        if f.cls not in FLOW_CLASSES:
            out.append(f"unknown class {f.cls!r}: flow {f.id}")
        v = _path_violation(net, f)
        if v:
            out.append(v)
        if not f.size_bits > 0:
            out.append(f"non-positive size: flow {f.id}")
        if f.rate_bps is not None and f.rate_bps < 0:
            out.append(f"negative rate: flow {f.id}")
        if f.freq_hz is not None and f.freq_hz < 0:
            out.append(f"negative frequency: flow {f.id}")
    return out


def total_latency(flow: FlowSpec, net: Network) -> float:
    """d_f: summed link latency along the path."""
    return sum(net.link(lid).latency_s for lid in flow.path)


def propagation_delay(flow: FlowSpec, net: Network) -> float:
    """Time one update needs to cross an empty network: d_f + sum of s_f / c_l."""
    return sum(net.link(lid).latency_s + flow.size_bits / net.link(lid).capacity_bps for lid in flow.path)


def shortest_path_routes(net: Network, endpoints: Sequence[tuple[str, str]]) -> list[tuple[str, ...]]:
    """Minimum-hop path per pair; ties go to the lexicographically smallest link-id sequence.

    BFS computes hop distances to the destination, then a greedy walk picks the
    smallest link id among links that make progress, which yields the
    lexicographically smallest sequence among all shortest paths.
    """
    routes = []
    for src, dst in endpoints:
        if src not in net.node_index or dst not in net.node_index:
            raise ModelError(f"unknown endpoint in ({src}, {dst})")
        if src == dst:
            raise ModelError(f"source equals destination: {src}")
        dist = {dst: 0}
        todo = deque([dst])
        while todo:
            n = todo.popleft()
            for l in net.links:
                if l.dst == n and l.src not in dist:
                    dist[l.src] = dist[n] + 1
                    todo.append(l.src)
        if src not in dist:
            raise NoRouteError(f"no route from {src} to {dst}")
        path = []
        node = src
        while node != dst:
            step = min(
                (l for l in net.out_links(node) if dist.get(l.dst, -1) == dist[node] - 1),
                key=lambda l: l.id,
            )
            path.append(step.id)
            node = step.dst
        routes.append(tuple(path))
    return routes


# -- topology JSON ---------------------------------------------------------


def _require(d: Mapping, key: str, where: str):
    if key not in d:
        raise ModelError(f"missing field {key!r} in {where}")
    return d[key]


def network_from_dict(doc: Mapping) -> Network:
    nodes = tuple(str(n) for n in _require(doc, "nodes", "topology"))
    links = []
    for i, d in enumerate(_require(doc, "links", "topology")):
        where = f"links[{i}]"
        links.append(
            Link(
                id=str(_require(d, "id", where)),
                src=str(_require(d, "src", where)),
                dst=str(_require(d, "dst", where)),
                capacity_bps=float(_require(d, "capacity_bps", where)),
                latency_s=float(d.get("latency_s", 0.0)),
            )
        )
    return Network(nodes, tuple(links))


def flows_from_dicts(net: Network, docs: Sequence[Mapping]) -> list[FlowSpec]:
    flows = []
    for i, d in enumerate(docs):
        where = f"flows[{i}]"
        if "path" in d:
            path = tuple(str(x) for x in d["path"])
        elif "src" in d and "dst" in d:
            path = shortest_path_routes(net, [(str(d["src"]), str(d["dst"]))])[0]
        else:
            raise ModelError(f"missing field 'path' (or 'src'/'dst') in {where}")
        cls = str(_require(d, "class", where))
        if cls.lower() == "aoi":
            cls = AOI
        elif cls.lower() == "lda":
            cls = LDA
        flows.append(
            FlowSpec(
                id=str(_require(d, "id", where)),
                cls=cls,
                path=path,
                size_bits=float(_require(d, "size_bits", where)),
                rate_bps=None if d.get("rate_bps") is None else float(d["rate_bps"]),
                freq_hz=None if d.get("freq_hz") is None else float(d["freq_hz"]),
                phase_s=float(d.get("phase_s", 0.0)),
            )
        )
    return flows


def topology_to_dict(net: Network, flows: Sequence[FlowSpec] = ()) -> dict:
    doc: dict = {
        "nodes": list(net.nodes),
        "links": [
            {"id": l.id, "src": l.src, "dst": l.dst, "capacity_bps": l.capacity_bps, "latency_s": l.latency_s}
            for l in net.links
        ],
    }
    fl = []
    for f in flows:
        d = {"id": f.id, "class": f.cls, "path": list(f.path), "size_bits": f.size_bits}
        if f.rate_bps is not None:
            d["rate_bps"] = f.rate_bps
        if f.freq_hz is not None:
            d["freq_hz"] = f.freq_hz
        if f.phase_s:
            d["phase_s"] = f.phase_s
        fl.append(d)
    doc["flows"] = fl
    return doc


def load_topology(path) -> tuple[Network, list[FlowSpec]]:
    with open(path) as fh:
        doc = json.load(fh)
    net = network_from_dict(doc)
    return net, flows_from_dicts(net, doc.get("flows", []))
