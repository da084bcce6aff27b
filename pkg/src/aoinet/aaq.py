"""AoI-aware queueing for one outport.

An outport classifies arriving packets into an LDA FIFO subqueue and an AoI
IFIL subqueue (inter-flow FIFO, intra-flow last-arrival-wins).  A scheduler
(SDM, TDM or strict AoI priority) picks the subqueue to serve whenever the
link is free; it never idles while either subqueue holds a packet.
"""

from __future__ import annotations

import math
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .model import AOI, LDA

IDLE = "Idle"


@dataclass(slots=True)
class Packet:
    flow_id: str
    cls: str
    size_bits: float
    gen_time: float
    seq: int


class Enq(Enum):
    INSERTED = "inserted"
    REPLACED = "replaced"
    REJECTED = "rejected"
    DROPPED = "dropped"


def classify(pkt: Packet, flow_classes: Mapping[str, str]) -> str:
    """Class of the flow a packet belongs to (stands in for the L4 protocol match)."""
    try:
        return flow_classes[pkt.flow_id]
    except KeyError:
        raise KeyError(f"unknown flow: {pkt.flow_id}") from None


class IfilQueue:
    """At most one packet per flow, flows served in first-arrival order.

    Backed by an OrderedDict, i.e. a hash table threaded by a doubly linked
    list, so lookup-and-replace is O(1).  ``move_to_back`` switches the
    replacement rule from in-place to re-queue at the tail.
    """

    def __init__(self, capacity: float = math.inf, move_to_back: bool = False):
        self.capacity = capacity
        self.move_to_back = move_to_back
        self._slots: OrderedDict[str, Packet] = OrderedDict()

    def __len__(self):
        return len(self._slots)

    def __bool__(self):
        return bool(self._slots)

    def __contains__(self, flow_id):
        return flow_id in self._slots

    def flows(self) -> list[str]:
        return list(self._slots)

    def packets(self) -> list[Packet]:
        return list(self._slots.values())

    def enqueue(self, pkt: Packet) -> tuple[Enq, Optional[Packet]]:
        old = self._slots.get(pkt.flow_id)
        if old is not None:
            self._slots[pkt.flow_id] = pkt
            if self.move_to_back:
                self._slots.move_to_end(pkt.flow_id)
            return Enq.REPLACED, old
        if len(self._slots) >= self.capacity:
            return Enq.REJECTED, None
        self._slots[pkt.flow_id] = pkt
        return Enq.INSERTED, None

    def dequeue(self) -> Optional[Packet]:
        if not self._slots:
            return None
        return self._slots.popitem(last=False)[1]


class LinearIfilQueue(IfilQueue):
    """Same behaviour with a plain list and linear search (overhead baseline)."""

    def __init__(self, capacity: float = math.inf, move_to_back: bool = False):
        self.capacity = capacity
        self.move_to_back = move_to_back
        self._list: list[Packet] = []

    def __len__(self):
        return len(self._list)

    def __bool__(self):
        return bool(self._list)

    def __contains__(self, flow_id):
        return any(p.flow_id == flow_id for p in self._list)

    def flows(self):
        return [p.flow_id for p in self._list]

    def packets(self):
        return list(self._list)

    def enqueue(self, pkt):
        for i, old in enumerate(self._list):
            if old.flow_id == pkt.flow_id:
                if self.move_to_back:
                    del self._list[i]
                    self._list.append(pkt)
                else:
                    self._list[i] = pkt
                return Enq.REPLACED, old
        if len(self._list) >= self.capacity:
            return Enq.REJECTED, None
        self._list.append(pkt)
        return Enq.INSERTED, None

    def dequeue(self):
        return self._list.pop(0) if self._list else None


def ifil_enqueue(q: IfilQueue, pkt: Packet) -> tuple[Enq, Optional[Packet]]:
    return q.enqueue(pkt)


def ifil_dequeue(q: IfilQueue) -> Optional[Packet]:
    return q.dequeue()


class FifoQueue:
    """Tail-drop FIFO bounded by total queued bits."""

    def __init__(self, max_bits: float = math.inf):
        self.max_bits = max_bits
        self.bits = 0.0
        self._q: deque[Packet] = deque()

    def __len__(self):
        return len(self._q)

    def __bool__(self):
        return bool(self._q)

    def packets(self) -> list[Packet]:
        return list(self._q)

    def enqueue(self, pkt: Packet) -> Enq:
        if self.bits + pkt.size_bits > self.max_bits:
            return Enq.DROPPED
        self._q.append(pkt)
        self.bits += pkt.size_bits
        return Enq.INSERTED

    def dequeue(self) -> Optional[Packet]:
        if not self._q:
            return None
        pkt = self._q.popleft()
        self.bits -= pkt.size_bits
        if not self._q:
            self.bits = 0.0
        return pkt


def fifo_enqueue(q: FifoQueue, pkt: Packet) -> Enq:
    return q.enqueue(pkt)


def _fallback(preferred: str, lda_empty: bool, aoi_empty: bool) -> str:
    empty = {LDA: lda_empty, AOI: aoi_empty}
    if not empty[preferred]:
        return preferred
    other = AOI if preferred == LDA else LDA
    if not empty[other]:
        return other
    return IDLE


@dataclass
class SdmState:
    """Size-driven multiplexing: a signed bit budget steers the choice.

    Sending s LDA bits adds gamma*s, sending s AoI bits removes (1-gamma)*s;
    AoI is preferred while the budget is positive.
    """

    gamma: float
    budget_bits: float = 0.0

    def account(self, cls: str, size_bits: float, *_):
        if cls == LDA:
            self.budget_bits += self.gamma * size_bits
        else:
            self.budget_bits -= (1 - self.gamma) * size_bits

    def decide(self, now: float, lda_empty: bool, aoi_empty: bool) -> str:
        return _fallback(AOI if self.budget_bits > 0 else LDA, lda_empty, aoi_empty)


def sdm_account(state: SdmState, cls: str, size_bits: float) -> SdmState:
    state.account(cls, size_bits)
    return state


def sdm_decide(state: SdmState, lda_empty: bool, aoi_empty: bool) -> str:
    return state.decide(0.0, lda_empty, aoi_empty)


@dataclass
class TdmState:
    """Time-division multiplexing over frames of ``frame_s``.

    Each frame is an LDA-priority phase of (1-gamma)T followed by an
    AoI-priority phase of gamma*T.  A transmission that runs past the end of
    its own phase pushes the phase boundary to its completion, and the other
    class's next phase is lengthened by overrun * (other share / own share)
    so the long-run time split stays (1-gamma) : gamma.
    """

    frame_s: float
    gamma: float
    start_s: float = 0.0
    phase: str = LDA
    phase_end_s: float = field(default=math.nan)
    debt_s: dict = field(default_factory=lambda: {LDA: 0.0, AOI: 0.0})
    frames_done: int = 0
    frame_marks: list = field(default_factory=list)

    def __post_init__(self):
        if not self.frame_s > 0:
            raise ValueError("frame_s must be > 0")
        if math.isnan(self.phase_end_s):
            self.phase_end_s = self.start_s + self.base(LDA)

    def share(self, cls: str) -> float:
        return self.gamma if cls == AOI else 1 - self.gamma

    def base(self, cls: str) -> float:
        return self.share(cls) * self.frame_s

    def _advance(self, now: float):
        while now >= self.phase_end_s:
            if now >= self.phase_end_s + self.frame_s and not any(self.debt_s.values()):
                k = math.floor((now - self.phase_end_s) / self.frame_s)
                self.phase_end_s += k * self.frame_s
                self.frames_done += k
                continue
            nxt = AOI if self.phase == LDA else LDA
            if nxt == LDA:
                self.frames_done += 1
                self.frame_marks.append(self.phase_end_s)
            self.phase = nxt
            self.phase_end_s += self.base(nxt) + self.debt_s[nxt]
            self.debt_s[nxt] = 0.0

    def decide(self, now: float, lda_empty: bool, aoi_empty: bool) -> str:
        self._advance(now)
        return _fallback(self.phase, lda_empty, aoi_empty)

    def account(self, cls: str, size_bits: float, tx_start: float, tx_end: float):
        if tx_end < tx_start:
            raise ValueError("tx_end precedes tx_start")
        self._advance(tx_start)
        if cls != self.phase or tx_end <= self.phase_end_s:
            return
        overrun = tx_end - self.phase_end_s
        own = self.share(cls)
        other = AOI if cls == LDA else LDA
        if own > 0:
            self.debt_s[other] += overrun * self.share(other) / own
        self.phase_end_s = tx_end


def tdm_decide(state: TdmState, now_s: float, lda_empty: bool, aoi_empty: bool) -> str:
    return state.decide(now_s, lda_empty, aoi_empty)


def tdm_account(state: TdmState, cls: str, tx_start_s: float, tx_end_s: float) -> TdmState:
    state.account(cls, 0.0, tx_start_s, tx_end_s)
    return state


@dataclass
class PriorityAoiState:
    """Strict AoI priority (work conserving)."""

    def account(self, *_):
        pass

    def decide(self, now: float, lda_empty: bool, aoi_empty: bool) -> str:
        return _fallback(AOI, lda_empty, aoi_empty)


class Aaq:
    """Classifier + LDA FIFO + AoI IFIL + scheduler for one outport."""

    def __init__(self, flow_classes: Mapping[str, str], scheduler, max_bits: float = math.inf, move_to_back: bool = False):
        self.flow_classes = flow_classes
        self.scheduler = scheduler
        self.lda = FifoQueue(max_bits)
        self.aoi = IfilQueue(move_to_back=move_to_back)

    def __len__(self):
        return len(self.lda) + len(self.aoi)

    def enqueue(self, pkt: Packet, now: float) -> tuple[Enq, Optional[Packet]]:
        if classify(pkt, self.flow_classes) == AOI:
            return self.aoi.enqueue(pkt)
        return self.lda.enqueue(pkt), None

    def dequeue(self, now: float) -> Optional[Packet]:
        which = self.scheduler.decide(now, not self.lda, not self.aoi)
        if which == IDLE:
            return None
        return self.aoi.dequeue() if which == AOI else self.lda.dequeue()

    def on_transmit(self, pkt: Packet, tx_start: float, tx_end: float):
        self.scheduler.account(pkt.cls, pkt.size_bits, tx_start, tx_end)

    def check_invariants(self):
        flows = self.aoi.flows()
        assert len(flows) == len(set(flows)), "IFIL holds two packets of one flow"
        assert self.lda.bits <= self.lda.max_bits + 1e-9, "FIFO over its bit limit"
