"""Deterministic store-and-forward packet simulator.

Every link has one outport at its source node.  Ports hold an AAQ (SDM, TDM
or strict AoI priority), a single shared FIFO (the baseline), a waiting-oracle
IFIL port, or the per-flow-share oracle.  Simultaneous events are ordered by
(time, node, event kind, flow); all arrivals at a node are processed before
the node's ports pick their next packet.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from ..aaq import AOI, IDLE, LDA, Aaq, Enq, FifoQueue, IfilQueue, Packet, PriorityAoiState, SdmState, TdmState
from ..fate import aoi_ratio, link_loads
from ..model import FlowSpec, Network, RateAllocation, propagation_delay, validate_network
from .measure import aligned_window, measure_aoi, measure_throughput, split_age
from .sources import GREEDY, PACED, TrafficSpec, periodic_times, random_traffic

log = logging.getLogger(__name__)

SDM = "SDM"
TDM = "TDM"
FIFO = "FIFO"
PRIORITY_AOI = "PriorityAoI"
PER_FLOW_SHARE = "PerFlowShare"
WAITING_ORACLE = "WaitingOracle"
SCHEDULERS = (SDM, TDM, FIFO, PRIORITY_AOI, PER_FLOW_SHARE, WAITING_ORACLE)

_ALIASES = {
    "sdm": SDM,
    "tdm": TDM,
    "fifo": FIFO,
    "fifo-baseline": FIFO,
    "priorityaoi": PRIORITY_AOI,
    "priority": PRIORITY_AOI,
    "perflowshare": PER_FLOW_SHARE,
    "perflowshare-oracle": PER_FLOW_SHARE,
    "waitingoracle": WAITING_ORACLE,
    "waiting": WAITING_ORACLE,
}

# event kinds, in tie-break order
TX_END, ARRIVE, GEN, TICK, WAKE = range(5)
_KIND_NAMES = ("tx_end", "arrive", "gen", "tick", "wake")


class SimulationError(RuntimeError):
    pass


def scheduler_name(name: str) -> str:
    key = name.replace("_", "").replace(" ", "").lower()
    if name in SCHEDULERS:
        return name
    if key in _ALIASES:
        return _ALIASES[key]
    raise ValueError(f"unknown scheduler: {name}")


@dataclass(frozen=True)
class SchedulerSpec:
    name: str = SDM
    frame_s: float = 1.0
    period_s: Optional[float] = None
    gamma: Optional[float | dict] = None

    def __post_init__(self):
        object.__setattr__(self, "name", scheduler_name(self.name))


@dataclass(frozen=True)
class Scenario:
    network: Network
    flows: tuple[FlowSpec, ...]
    scheduler: SchedulerSpec = SchedulerSpec()
    duration_s: float = 100.0
    warmup_s: Optional[float] = None
    seed: int = 0
    allocation: Optional[RateAllocation] = None
    objective: Optional[str] = None
    lam: Optional[float] = None
    lda_mode: str = PACED
    greedy_window: int = 1
    fifo_max_packets: float = 100
    ifil_move_to_back: bool = False
    random_phase: bool = False
    s_lda_bits: float = 1.0
    align_window: bool = True
    debug: bool = False
    trace_path: Optional[str] = None
    max_events: int = 10_000_000
    time_resolution_s: Optional[float] = None
    traffic: Optional[TrafficSpec] = None

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("duration must be > 0")
        if self.warmup_s is not None and not 0 <= self.warmup_s < self.duration_s:
            raise ValueError("need duration > warmup >= 0")
        if self.lda_mode not in (PACED, GREEDY):
            raise ValueError(f"unknown LDA mode: {self.lda_mode}")

    @property
    def resolution(self) -> float:
        """Grid used to order events; 0 orders on exact times.

        Events on the same grid point count as simultaneous, so float drift
        cannot reorder events that coincide in exact arithmetic (an arrival
        landing on a transmission end).
        """
        if self.time_resolution_s is not None:
            return self.time_resolution_s
        return 10.0 ** math.floor(math.log10(self.duration_s * 1e-12))

    @property
    def warmup(self) -> float:
        return 0.1 * self.duration_s if self.warmup_s is None else self.warmup_s


@dataclass
class DeliveryLog:
    deliveries: dict[str, list[tuple[float, float, float]]] = field(default_factory=dict)
    busy: dict[str, dict[str, list[float]]] = field(default_factory=dict)

    def pairs(self, flow_id: str) -> list[tuple[float, float]]:
        return [(t, g) for t, g, _ in self.deliveries.get(flow_id, [])]


@dataclass
class FlowCounters:
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    replaced: int = 0
    in_flight: int = 0


@dataclass
class SimReport:
    window: tuple[float, float]
    aoi_s: dict[str, float]
    decomposition: dict[str, tuple[float, float, float]]
    throughput_bps: dict[str, float]
    counters: dict[str, FlowCounters]
    gamma_achieved: dict[str, float]
    aoi_windows: dict[str, tuple[float, float]]
    log: DeliveryLog
    events: int = 0

    @property
    def total_lda_throughput_bps(self) -> float:
        return math.fsum(self.throughput_bps.values())

    @property
    def total_aoi_s(self) -> float:
        return math.fsum(self.aoi_s.values())

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "aoi_s": self.aoi_s,
            "decomposition": {k: {"u_avg": u, "p_avg": p, "q_avg": q} for k, (u, p, q) in self.decomposition.items()},
            "throughput_bps": self.throughput_bps,
            "total_lda_throughput_bps": self.total_lda_throughput_bps,
            "total_aoi_s": self.total_aoi_s,
            "counters": {k: vars(c) for k, c in self.counters.items()},
            "gamma_achieved": self.gamma_achieved,
            "events": self.events,
        }

    def csv_rows(self) -> list[dict]:
        rows = []
        for fid, a in self.aoi_s.items():
            u, p, q = self.decomposition.get(fid, (math.nan,) * 3)
            rows.append({"flow": fid, "class": AOI, "aoi_s": a, "u_avg": u, "p_avg": p, "q_avg": q, "throughput_bps": ""})
        for fid, thr in self.throughput_bps.items():
            rows.append({"flow": fid, "class": LDA, "aoi_s": "", "u_avg": "", "p_avg": "", "q_avg": "", "throughput_bps": thr})
        return rows


# -- ports -----------------------------------------------------------------


class _Port:
    parallel = False

    def __init__(self, link):
        self.link = link
        self.busy = False
        self.current: Optional[Packet] = None
        self.wake_pending = False

    def queued(self) -> int:
        raise NotImplementedError


class _AaqPort(_Port):
    def __init__(self, link, aaq: Aaq):
        super().__init__(link)
        self.q = aaq

    def enqueue(self, pkt, now):
        return self.q.enqueue(pkt, now)

    def next_packet(self, now):
        return self.q.dequeue(now)

    def on_transmit(self, pkt, start, end):
        self.q.on_transmit(pkt, start, end)

    def queued(self):
        return len(self.q)

    def queued_packets(self):
        return self.q.lda.packets() + self.q.aoi.packets()


class _FifoPort(_Port):
    def __init__(self, link, max_bits):
        super().__init__(link)
        self.q = FifoQueue(max_bits)

    def enqueue(self, pkt, now):
        return self.q.enqueue(pkt), None

    def next_packet(self, now):
        return self.q.dequeue()

    def on_transmit(self, pkt, start, end):
        pass

    def queued(self):
        return len(self.q)

    def queued_packets(self):
        return self.q.packets()


class _WaitingOraclePort(_Port):
    """Holds AoI service to fixed instants; LDA only uses the link in between."""

    def __init__(self, link, max_bits, move_to_back):
        super().__init__(link)
        self.aoi = IfilQueue(move_to_back=move_to_back)
        self.lda = FifoQueue(max_bits)
        self.tick_ready = False

    def enqueue(self, pkt, now):
        if pkt.cls == AOI:
            return self.aoi.enqueue(pkt)
        return self.lda.enqueue(pkt), None

    def next_packet(self, now):
        if self.tick_ready:
            self.tick_ready = False
            if self.aoi:
                return self.aoi.dequeue()
        return self.lda.dequeue()

    def on_transmit(self, pkt, start, end):
        pass

    def queued(self):
        return len(self.aoi) + len(self.lda)

    def queued_packets(self):
        return self.aoi.packets() + self.lda.packets()


class _ShareOraclePort(_Port):
    """Dedicated fluid share c_l * x_f / (S_LDA + S_AoI) per flow."""

    parallel = True

    def __init__(self, link, rates: dict[str, float], tie_s: float = 0.0):
        super().__init__(link)
        self.rates = rates
        self.tie_s = tie_s
        self.free_at: dict[str, float] = {}
        self.in_service = 0

    def finish_time(self, pkt: Packet, now: float) -> float:
        rate = self.rates.get(pkt.flow_id, 0.0)
        if not rate > 0:
            raise SimulationError(f"zero-rate flow {pkt.flow_id} scheduled on {self.link.id}")
        prev = self.free_at.get(pkt.flow_id, -math.inf)
        # A finish that coincides with this arrival up to the grid is a tie;
        # honouring a finish that drifted late would ratchet the delay upward.
        start = now if prev <= now + self.tie_s else prev
        end = start + pkt.size_bits / rate
        self.free_at[pkt.flow_id] = end
        return end

    def queued(self):
        return 0


def per_flow_share_oracle(alloc: RateAllocation, net: Network, flows: Sequence[FlowSpec]) -> dict[str, dict[str, float]]:
    """Per-link, per-flow service rates that realise the bounded-age policy.

    Each flow on link l is served at c_l * x_f / (S_LDA(l) + S_AoI(l)), where
    x_f is r_f or mu_f * s_f.  Under a feasible allocation each update then
    clears every hop within 1/mu_f of reaching it.
    """
    loads = link_loads(alloc.values, net, flows)
    out: dict[str, dict[str, float]] = {l.id: {} for l in net.links}
    for f in flows:
        v = alloc.value(f.id)
        x = v * f.size_bits if f.is_aoi else v
        if f.is_aoi and not v > 0:
            continue
        for lid in f.path:
            total = sum(loads[lid])
            if total > 0 and x > 0:
                out[lid][f.id] = net.link(lid).capacity_bps * x / total
    return out


def waiting_oracle_period(t_i: float, d_t: float) -> float:
    """Smallest multiple of the inter-arrival time covering one transmission."""
    if not (t_i > 0 and d_t > 0):
        raise ValueError("need T_i > 0 and d_t > 0")
    return t_i * max(1, math.ceil(d_t / t_i - 1e-12))


# -- engine ----------------------------------------------------------------


class Engine:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        net = scenario.network
        self.net = net
        flows = list(scenario.flows)
        if scenario.allocation is not None:
            flows = scenario.allocation.apply(flows)
        problems = validate_network(net, flows)
        if problems:
            raise SimulationError("invalid scenario: " + "; ".join(problems))
        rng = random.Random(scenario.seed)
        if scenario.random_phase:
            flows = [self._jitter(f, rng) for f in flows]
        self.flows = flows
        self.flow_by_id = {f.id: f for f in flows}
        self.flow_index = {f.id: i for i, f in enumerate(flows)}
        self.classes = {f.id: f.cls for f in flows}
        self.counters = {f.id: FlowCounters() for f in flows}
        self.log = DeliveryLog(
            deliveries={f.id: [] for f in flows},
            busy={l.id: {LDA: [0.0, 0.0], AOI: [0.0, 0.0]} for l in net.links},
        )
        self.heap: list = []
        self._q = scenario.resolution
        self._n = 0
        self.now = 0.0
        self.events = 0
        self.seq = {f.id: 0 for f in flows}
        self.in_transit = 0
        self.greedy_queued = {f.id: 0 for f in flows}
        self.greedy_at: dict[str, list[str]] = {}
        self.greedy_turn: dict[str, int] = {}
        self.ports = {l.id: self._make_port(l) for l in net.links}
        self.trace = open(scenario.trace_path, "w") if scenario.trace_path else None

    @staticmethod
    def _jitter(f: FlowSpec, rng: random.Random) -> FlowSpec:
        if f.is_aoi:
            period = 1 / f.freq_hz if f.freq_hz else 0.0
        else:
            period = f.size_bits / f.rate_bps if f.rate_bps else 0.0
        return replace(f, phase_s=f.phase_s + rng.random() * period)

    # -- setup

    def _gamma_for(self, link_id: str, loads) -> float:
        g = self.sc.scheduler.gamma
        if isinstance(g, dict) and link_id in g:
            return float(g[link_id])
        if isinstance(g, (int, float)):
            return float(g)
        if self.sc.allocation is not None and link_id in self.sc.allocation.gamma:
            return self.sc.allocation.gamma[link_id]
        return aoi_ratio(*loads[link_id])

    def _max_bits(self, link_id: str) -> float:
        sizes = [f.size_bits for f in self.flows if link_id in f.path]
        if not sizes or math.isinf(self.sc.fifo_max_packets):
            return math.inf
        return self.sc.fifo_max_packets * max(sizes)

    def _make_port(self, link):
        spec = self.sc.scheduler
        name = spec.name
        if name == PER_FLOW_SHARE:
            alloc = self.sc.allocation or RateAllocation(
                values={f.id: f.value or 0.0 for f in self.flows}, loads={}, gamma={}
            )
            rates = per_flow_share_oracle(alloc, self.net, self.flows)
            return _ShareOraclePort(link, rates[link.id], 2 * self.sc.resolution)
        max_bits = self._max_bits(link.id)
        if name == FIFO:
            return _FifoPort(link, max_bits)
        if name == WAITING_ORACLE:
            return _WaitingOraclePort(link, max_bits, self.sc.ifil_move_to_back)
        loads = link_loads({f.id: f.value or 0.0 for f in self.flows}, self.net, self.flows)
        gamma = self._gamma_for(link.id, loads)
        if name == SDM:
            sched = SdmState(gamma)
        elif name == TDM:
            sched = TdmState(spec.frame_s, gamma)
        elif name == PRIORITY_AOI:
            sched = PriorityAoiState()
        else:
            raise ValueError(f"unknown scheduler: {name}")
        return _AaqPort(link, Aaq(self.classes, sched, max_bits, self.sc.ifil_move_to_back))

    # -- event plumbing

    def _push(self, t: float, node: str, kind: int, flow_id: Optional[str], payload):
        fi = self.flow_index.get(flow_id, -1) if flow_id is not None else -1
        self._n += 1
        heapq.heappush(self.heap, (self._key(t), self.net.node_index[node], kind, fi, self._n, t, payload))
        if len(self.heap) > self.sc.max_events:
            raise SimulationError("event queue overflow")

    def _key(self, t: float) -> float:
        # Order on the grid, keep exact times: rounding the times themselves
        # would drift along back-to-back transmission chains.
        return round(t / self._q) if self._q > 0 else t

    def _emit(self, kind: int, node: str, flow_id, seq):
        if self.trace:
            self.trace.write(f"{self.now!r} {node} {_KIND_NAMES[kind]} {flow_id} {seq}\n")

    def _wake(self, port: _Port):
        if not port.busy and not port.wake_pending:
            port.wake_pending = True
            self._push(self.now, port.link.src, WAKE, None, port.link.id)

    def _new_packet(self, f: FlowSpec) -> Packet:
        s = self.seq[f.id]
        self.seq[f.id] = s + 1
        self.counters[f.id].generated += 1
        return Packet(f.id, f.cls, f.size_bits, self.now, s)

    def _enqueue(self, port: _Port, pkt: Packet) -> Enq:
        if port.parallel:
            end = port.finish_time(pkt, self.now)
            port.free_at[pkt.flow_id] = end
            self.in_transit += 1
            self._account_busy(port, pkt, self.now, end)
            self._push(end, port.link.src, TX_END, pkt.flow_id, (port.link.id, pkt))
            return Enq.INSERTED
        status, old = port.enqueue(pkt, self.now)
        if status in (Enq.DROPPED, Enq.REJECTED):
            self.counters[pkt.flow_id].dropped += 1
        elif status == Enq.REPLACED:
            self.counters[old.flow_id].replaced += 1
            if self._is_greedy_head(old, port):
                self.greedy_queued[old.flow_id] -= 1
        if self.sc.debug and isinstance(port, _AaqPort):
            port.q.check_invariants()
        if status in (Enq.INSERTED, Enq.REPLACED):
            self._wake(port)
        return status

    def _is_greedy_head(self, pkt: Packet, port: _Port) -> bool:
        f = self.flow_by_id[pkt.flow_id]
        return (not f.is_aoi) and self.sc.lda_mode == GREEDY and f.path[0] == port.link.id

    def _account_busy(self, port, pkt, start, end):
        led = self.log.busy[port.link.id][pkt.cls]
        led[0] += end - start
        led[1] += pkt.size_bits

    def _refill(self, link_id: str):
        """Top greedy senders attached to this first hop back up to their window."""
        members = self.greedy_at.get(link_id)
        if not members:
            return
        port = self.ports[link_id]
        k = self.greedy_turn[link_id]
        n = len(members)
        self.greedy_turn[link_id] = (k + 1) % n
        for j in range(n):
            f = self.flow_by_id[members[(k + j) % n]]
            while self.greedy_queued[f.id] < self.sc.greedy_window:
                pkt = self._new_packet(f)
                if self._enqueue(port, pkt) != Enq.INSERTED:
                    return
                self.greedy_queued[f.id] += 1

    # -- main loop

    def _schedule_sources(self, horizon: float):
        for f in self.flows:
            if f.is_aoi:
                if f.freq_hz and f.freq_hz > 0 and f.phase_s < horizon:
                    self._push(f.phase_s, self._src(f), GEN, f.id, 0)
            elif self.sc.lda_mode == GREEDY:
                if (f.rate_bps is None or f.rate_bps > 0) and f.phase_s < horizon:
                    self.greedy_at.setdefault(f.path[0], []).append(f.id)
                    self.greedy_turn.setdefault(f.path[0], 0)
                    self._push(f.phase_s, self._src(f), GEN, f.id, -1)
            elif f.rate_bps and f.rate_bps > 0 and f.phase_s < horizon:
                self._push(f.phase_s, self._src(f), GEN, f.id, 0)
        if self.sc.scheduler.name == WAITING_ORACLE:
            for port in self.ports.values():
                self._schedule_ticks(port, horizon)

    def _schedule_ticks(self, port, horizon):
        aoi = [f for f in self.flows if f.is_aoi and f.path[0] == port.link.id and f.freq_hz]
        spec = self.sc.scheduler
        if not aoi:
            return
        ref = aoi[0]
        period = 1 / ref.freq_hz
        hold = spec.period_s or waiting_oracle_period(period, ref.size_bits / port.link.capacity_bps)
        m = hold / period
        if abs(m - round(m)) < 1e-9:
            port.tick_times = (ref.phase_s, round(m), period)
        else:
            port.tick_times = (ref.phase_s, 1, hold)
        self._push(ref.phase_s, port.link.src, TICK, None, (port.link.id, 0))

    def _tick_time(self, port, j):
        phase, m, period = port.tick_times
        return periodic_times(phase, period, j * m)

    def _src(self, f: FlowSpec) -> str:
        return self.net.link(f.path[0]).src

    def run(self) -> SimReport:
        horizon = self.sc.duration_s
        self._schedule_sources(horizon)
        heap = self.heap
        while heap:
            if heap[0][5] >= horizon:
                break
            _, _, kind, fi, _, t, payload = heapq.heappop(heap)
            # Same-key events may differ by less than the grid; time never runs back.
            self.now = max(self.now, t)
            self.events += 1
            if self.events > self.sc.max_events:
                raise SimulationError("event budget exceeded")
            if kind == GEN:
                self._on_gen(self.flows[fi], payload, horizon)
            elif kind == TX_END:
                self._on_tx_end(*payload)
            elif kind == ARRIVE:
                self._on_arrive(*payload)
            elif kind == WAKE:
                self._on_wake(self.ports[payload])
            elif kind == TICK:
                self._on_tick(*payload, horizon)
        if self.trace:
            self.trace.close()
        return self._report()

    def _on_gen(self, f: FlowSpec, k: int, horizon: float):
        first = f.path[0]
        if k < 0:
            self._emit(GEN, self._src(f), f.id, -1)
            self._refill(first)
            return
        pkt = self._new_packet(f)
        self._emit(GEN, self._src(f), f.id, pkt.seq)
        self._enqueue(self.ports[first], pkt)
        period = 1 / f.freq_hz if f.is_aoi else f.size_bits / f.rate_bps
        nxt = periodic_times(f.phase_s, period, k + 1)
        if nxt < horizon:
            self._push(nxt, self._src(f), GEN, f.id, k + 1)

    def _on_tx_end(self, link_id: str, pkt: Packet):
        port = self.ports[link_id]
        link = port.link
        self._emit(TX_END, link.src, pkt.flow_id, pkt.seq)
        self._push(self.now + link.latency_s, link.dst, ARRIVE, pkt.flow_id, (link_id, pkt))
        if port.parallel:
            return
        port.busy = False
        port.current = None
        self.in_transit += 1
        self._wake(port)

    def _on_arrive(self, link_id: str, pkt: Packet):
        self.in_transit -= 1
        f = self.flow_by_id[pkt.flow_id]
        link = self.net.link(link_id)
        self._emit(ARRIVE, link.dst, pkt.flow_id, pkt.seq)
        hop = f.path.index(link_id)
        if hop == len(f.path) - 1:
            self.counters[f.id].delivered += 1
            self.log.deliveries[f.id].append((self.now, pkt.gen_time, pkt.size_bits))
            if self.sc.debug:
                lb = pkt.gen_time + propagation_delay(f, self.net)
                if self.now < lb - 1e-9 * max(1.0, abs(lb)):
                    raise SimulationError(f"causality violated for {f.id}#{pkt.seq}")
            return
        self._enqueue(self.ports[f.path[hop + 1]], pkt)

    def _on_wake(self, port: _Port):
        port.wake_pending = False
        if port.busy:
            return
        pkt = port.next_packet(self.now)
        if pkt is None:
            return
        link = port.link
        end = self.now + pkt.size_bits / link.capacity_bps
        port.busy = True
        port.current = pkt
        port.on_transmit(pkt, self.now, end)
        self._account_busy(port, pkt, self.now, end)
        self._emit(WAKE, link.src, pkt.flow_id, pkt.seq)
        self._push(end, link.src, TX_END, pkt.flow_id, (link.id, pkt))
        if self._is_greedy_head(pkt, port):
            self.greedy_queued[pkt.flow_id] -= 1
        self._refill(link.id)
        if self.sc.debug and isinstance(port, _AaqPort):
            port.q.check_invariants()

    def _on_tick(self, link_id, j, horizon):
        port = self.ports[link_id]
        port.tick_ready = True
        self._wake(port)
        nxt = self._tick_time(port, j + 1)
        if nxt < horizon:
            self._push(nxt, port.link.src, TICK, None, (link_id, j + 1))

    # -- reporting

    def _report(self) -> SimReport:
        sc = self.sc
        window = (sc.warmup, sc.duration_s)
        aoi, dec, thr, wins = {}, {}, {}, {}
        for f in self.flows:
            d = self.log.deliveries[f.id]
            if f.is_aoi:
                pairs = [(t, g) for t, g, _ in d]
                start = window[0]
                if pairs:
                    start = max(start, pairs[0][0]) if pairs[0][0] < window[1] else start
                w = (start, window[1])
                if sc.align_window:
                    w = aligned_window(pairs, w)
                initial = f.phase_s if self.counters[f.id].generated else 0.0
                aoi[f.id] = measure_aoi(pairs, w, initial_gen=initial)
                wins[f.id] = w
                if f.freq_hz:
                    dec[f.id] = split_age(aoi[f.id], f, self.net)
            else:
                thr[f.id] = measure_throughput(d, window)
        pending = self._in_flight()
        for fid, c in self.counters.items():
            c.in_flight = pending.get(fid, 0)
        gam = {}
        for lid, led in self.log.busy.items():
            bits = led[LDA][1] + led[AOI][1]
            gam[lid] = led[AOI][1] / bits if bits > 0 else math.nan
        return SimReport(window, aoi, dec, thr, self.counters, gam, wins, self.log, self.events)

    def _in_flight(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for port in self.ports.values():
            if port.parallel:
                continue
            for p in port.queued_packets():
                out[p.flow_id] = out.get(p.flow_id, 0) + 1
            if port.current is not None:
                out[port.current.flow_id] = out.get(port.current.flow_id, 0) + 1
        for item in self.heap:
            kind, payload = item[2], item[6]
            if kind == ARRIVE or (kind == TX_END and self.ports[payload[0]].parallel):
                pkt = payload[1]
                out[pkt.flow_id] = out.get(pkt.flow_id, 0) + 1
        return out


def run(scenario: Scenario) -> SimReport:
    """Simulate a scenario.

    Draws random traffic from the seed when the scenario has a traffic spec
    and no flows, and solves for an allocation first when only an objective
    is given.
    """
    if not scenario.flows and scenario.traffic is not None:
        scenario = replace(scenario, flows=tuple(random_traffic(scenario.network, scenario.traffic, scenario.seed)))
    if scenario.allocation is None and scenario.objective is not None:
        from ..fate import SolverConfig, solve

        alloc = solve(
            scenario.objective,
            scenario.network,
            scenario.flows,
            SolverConfig(lam=scenario.lam or 0.0),
            s_lda=scenario.s_lda_bits,
        )
        scenario = replace(scenario, allocation=alloc)
    return Engine(scenario).run()
