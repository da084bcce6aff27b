"""Traffic sources: periodic status updates and paced/greedy LDA senders."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..model import AOI, LDA, FlowSpec, Network, NoRouteError, shortest_path_routes

PACED = "paced"
GREEDY = "greedy"


def periodic_times(phase: float, period: float, k: int) -> float:
    # Index-based so that independent schedules sharing a period land on
    # bit-identical instants.
    return phase + k * period


def periodic_source_events(flow: FlowSpec, horizon_s: float) -> list[float]:
    """Generation instants phase + k/mu below the horizon."""
    mu = flow.freq_hz or 0.0
    if mu <= 0:
        return []
    period = 1 / mu
    out = []
    k = 0
    while (t := periodic_times(flow.phase_s, period, k)) < horizon_s:
        out.append(t)
        k += 1
    return out


def lda_source_events(flow: FlowSpec, mode: str, horizon_s: float) -> list[float]:
    """Paced mode: back-to-back packets at the allocated average rate.

    Greedy senders react to queue state, so only their start instant is
    known in advance.
    """
    rate = flow.rate_bps
    if mode == GREEDY:
        return [flow.phase_s] if (rate is None or rate > 0) and flow.phase_s < horizon_s else []
    if mode != PACED:
        raise ValueError(f"unknown LDA mode: {mode}")
    if not rate or rate <= 0:
        return []
    gap = flow.size_bits / rate
    n = max(0, math.ceil((horizon_s - flow.phase_s) / gap))
    return [t for t in (periodic_times(flow.phase_s, gap, k) for k in range(n + 1)) if t < horizon_s]


@dataclass(frozen=True)
class TrafficSpec:
    """Random traffic pattern: each ordered node pair hosts an LDA flow and,
    independently, an AoI flow with probability ``pair_prob``."""

    pair_prob: float = 0.1
    lda_size_bits: float = 1.0
    aoi_size_bits: float = 1.0

    def __post_init__(self):
        if not 0 <= self.pair_prob <= 1:
            raise ValueError("pair probability must lie in [0, 1]")
        if not (self.lda_size_bits > 0 and self.aoi_size_bits > 0):
            raise ValueError("packet sizes must be positive")


def random_traffic(net: Network, spec: TrafficSpec, seed: int) -> list[FlowSpec]:
    """Flows drawn from ``seed`` alone, routed on shortest paths.

    Pairs without a directed route are skipped after drawing, so the draw
    sequence does not depend on reachability.
    """
    rng = random.Random(seed)
    nodes = sorted(net.nodes)
    picks = []
    for s in nodes:
        for d in nodes:
            if s == d:
                continue
            if rng.random() < spec.pair_prob:
                picks.append((LDA, s, d))
            if rng.random() < spec.pair_prob:
                picks.append((AOI, s, d))
    flows = []
    for cls, s, d in picks:
        try:
            (path,) = shortest_path_routes(net, [(s, d)])
        except NoRouteError:
            continue
        size = spec.aoi_size_bits if cls == AOI else spec.lda_size_bits
        tag = "aoi" if cls == AOI else "lda"
        flows.append(FlowSpec(f"{tag}:{s}>{d}", cls, path, size))
    return flows
