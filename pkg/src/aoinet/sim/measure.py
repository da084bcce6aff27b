"""Age and throughput measurement over a delivery log."""

from __future__ import annotations

import math
from typing import Optional, Sequence

from ..model import FlowSpec, Network, propagation_delay


class MeasurementError(ValueError):
    pass


def measure_aoi(
    deliveries: Sequence[tuple[float, float]],
    window: tuple[float, float],
    initial_gen: Optional[float] = None,
) -> float:
    """Time-average of a(t) = t - G(t) over ``window``.

    ``deliveries`` holds (delivery time, generation time) pairs in delivery
    order; G(t) is the newest generation time delivered at or before t, so a
    stale (out-of-order) delivery leaves the age untouched.  ``initial_gen``
    stands in for G before the first delivery; without it the window must
    start at or after a delivery.
    """
    start, end = window
    if not end > start:
        raise MeasurementError("empty measurement window")
    g = -math.inf
    i = 0
    n = len(deliveries)
    while i < n and deliveries[i][0] <= start:
        g = max(g, deliveries[i][1])
        i += 1
    if g == -math.inf:
        if initial_gen is None:
            raise MeasurementError("no delivery at or before the window start")
        g = initial_gen
    parts = []
    prev = start
    while i < n and deliveries[i][0] < end:
        t, gen = deliveries[i]
        parts.append((t - prev) * ((prev - g) + (t - g)) / 2)
        prev = t
        if gen > g:
            g = gen
        i += 1
    parts.append((end - prev) * ((prev - g) + (end - g)) / 2)
    return math.fsum(parts) / (end - start)


def aligned_window(deliveries: Sequence[tuple[float, float]], window: tuple[float, float]) -> tuple[float, float]:
    """Shrink ``window`` to span whole inter-delivery intervals.

    Starts at the first delivery at/after the window start and ends at the
    last delivery before the window end, so a periodic sawtooth is averaged
    over complete periods.  Falls back to the nominal window (clipped to the
    first delivery) when fewer than two deliveries fall inside.
    """
    start, end = window
    inside = [t for t, _ in deliveries if start <= t < end]
    if len(inside) >= 2 and inside[-1] > inside[0]:
        return inside[0], inside[-1]
    if deliveries and deliveries[0][0] > start and deliveries[0][0] < end:
        return deliveries[0][0], end
    return start, end


def measure_throughput(deliveries: Sequence[tuple[float, float, float]], window: tuple[float, float]) -> float:
    """Delivered bits per second over the half-open window [start, end)."""
    start, end = window
    if not end > start:
        raise MeasurementError("empty measurement window")
    bits = math.fsum(d[2] for d in deliveries if start <= d[0] < end)
    return bits / (end - start)


def split_age(aoi_s: float, flow: FlowSpec, net: Network) -> tuple[float, float, float]:
    """(u, p, q) parts of an already measured AoI."""
    if not flow.freq_hz:
        raise MeasurementError(f"flow {flow.id} has no update frequency")
    u = 1 / (2 * flow.freq_hz)
    p = propagation_delay(flow, net)
    return u, p, aoi_s - u - p


def decompose_age(
    deliveries: Sequence[tuple[float, float]],
    flow: FlowSpec,
    net: Network,
    window: tuple[float, float],
    initial_gen: Optional[float] = None,
) -> tuple[float, float, float]:
    """Split the measured AoI into periodic-update, propagation and queueing parts.

    u = 1/(2 mu) and p = p_f are analytic; q takes the remainder.
    """
    return split_age(measure_aoi(deliveries, window, initial_gen), flow, net)
