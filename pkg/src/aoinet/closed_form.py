"""Single-link analytic model of SDM and TDM.

One output link of capacity C carries a backlogged LDA class and one
periodic AoI flow (inter-arrival T_i, transmission time d_t, propagation
d_p).  Throughput is normalised by C and AoI by d_t/2 in the trade-off
objective.  Inputs outside the regime where the formulas were validated
still return a value, with a warning attached to the result.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional


class RegimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SingleLinkParams:
    C: float = 1.0
    T_i: float = 1.0
    T_f: float = 10.0
    d_t: float = 0.5
    d_p: float = 0.0
    gamma: float = 0.5
    lam: float = 0.125
    T_o: Optional[float] = None  # minimum output period; informational

    def regime_issues(self, scheme: str) -> list[str]:
        out = []
        if not (self.C > 0 and self.T_i > 0 and self.d_t > 0):
            out.append("C, T_i and d_t must be positive")
        if not 0 < self.gamma <= 1:
            out.append("gamma outside (0, 1]")
        if self.d_p < 0:
            out.append("negative propagation delay")
        if scheme == "tdm" and not self.T_f >= self.T_i:
            out.append("TDM formulas assume T_f >= T_i")
        if scheme == "sdm" and self.gamma > 0 and self.d_t / self.gamma < self.T_i:
            out.append("SDM formulas assume d_t / gamma >= T_i")
        return out


def _checked(p: SingleLinkParams, scheme: str, value: float) -> float:
    issues = p.regime_issues(scheme)
    for msg in issues:
        warnings.warn(f"{scheme}: {msg}", RegimeWarning, stacklevel=3)
    return value


def tdm_throughput(p: SingleLinkParams) -> float:
    r = p.d_t / p.T_i
    return _checked(p, "tdm", p.C * ((1 - r * p.gamma) - (1 - r) * p.d_t / p.T_f))


def tdm_aoi(p: SingleLinkParams) -> float:
    lead = ((1 - p.gamma) * p.T_f + p.d_t) ** 2 / (2 * p.T_f)
    return _checked(p, "tdm", lead + p.T_i / 2 + p.d_t + p.d_p)


def sdm_throughput(p: SingleLinkParams) -> float:
    if not 0 <= p.gamma <= 1:
        warnings.warn("sdm: gamma outside [0, 1]", RegimeWarning, stacklevel=2)
    return p.C * (1 - p.gamma)


def sdm_aoi(p: SingleLinkParams) -> float:
    if p.gamma <= 0:
        raise ValueError("SDM AoI is undefined for gamma = 0")
    return _checked(p, "sdm", 0.5 * (p.d_t / p.gamma + p.T_i) + p.d_t + p.d_p)


def optimal_gamma_sdm(lam: float) -> float:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return min(math.sqrt(lam), 1.0)


def optimal_gamma_tdm(lam: float, d_t: float, T_f: float, T_i: float) -> float:
    if not lam > 0:
        raise ValueError("lambda must be > 0 for the TDM optimum")
    if not (d_t > 0 and T_f > 0 and T_i > 0):
        raise ValueError("d_t, T_f and T_i must be positive")
    g = 1 + d_t / T_f - d_t * d_t / (2 * lam * T_f * T_i)
    return min(max(g, 0.0), 1.0)


def tradeoff_objective(throughput: float, aoi: float, lam: float, C: float, d_t: float) -> float:
    if not (C > 0 and d_t > 0):
        raise ValueError("C and d_t must be positive")
    return throughput / C - lam * aoi / (d_t / 2)


def ifil_gap_bound(T_i: float) -> float:
    """Worst-case AoI excess of IFIL over the best single-server policy."""
    if not T_i > 0:
        raise ValueError("T_i must be positive")
    return T_i / 2


def gamma_table(p: SingleLinkParams, gammas, scheme: str = "sdm") -> list[dict]:
    """Rows of (gamma, both schemes' throughput/AoI, objective of ``scheme``)."""
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for g in gammas:
            q = replace(p, gamma=g)
            tt, ta = tdm_throughput(q), tdm_aoi(q)
            st = sdm_throughput(q)
            sa = sdm_aoi(q) if g > 0 else math.inf
            thr, aoi = (st, sa) if scheme == "sdm" else (tt, ta)
            rows.append(
                {
                    "gamma": g,
                    "tdm_throughput": tt,
                    "tdm_aoi": ta,
                    "sdm_throughput": st,
                    "sdm_aoi": sa,
                    "objective": tradeoff_objective(thr, aoi, p.lam, p.C, p.d_t),
                }
            )
    return rows
