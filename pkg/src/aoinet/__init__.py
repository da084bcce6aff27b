"""Freshness-aware traffic engineering, AoI-aware queueing and a packet simulator."""

from .model import AOI, LDA, FlowSpec, Link, Network, RateAllocation, load_topology, propagation_delay, validate_network
from .fate import SolverConfig, SolverError, solve, solve_lac, solve_lou2020, solve_max_throughput, solve_min_aoi

__all__ = [
    "AOI",
    "LDA",
    "FlowSpec",
    "Link",
    "Network",
    "RateAllocation",
    "SolverConfig",
    "SolverError",
    "load_topology",
    "propagation_delay",
    "solve",
    "solve_lac",
    "solve_lou2020",
    "solve_max_throughput",
    "solve_min_aoi",
    "validate_network",
]
