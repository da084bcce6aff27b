"""Rate/frequency allocation: LAC and the comparison objectives.

All four programs share the feasible set

    sum_{LDA f on l} r_f + sum_{AoI f on l} mu_f s_f <= c_l,   r, mu >= 0

and are solved on the original variables, whose objective gradients and
Hessians are diagonal and closed form.  A primal-dual interior-point method
runs first; a logarithmic-barrier Newton path is the fallback.  Either result
is finished by active-set Newton on the KKT equations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import linprog, nnls

from .model import AOI, LDA, FlowSpec, Network, RateAllocation, SolverDiagnostics, total_latency

log = logging.getLogger(__name__)

LAC = "lac"
MAX_THROUGHPUT = "max_throughput"
MIN_AOI = "min_aoi"
LOU2020 = "lou2020"
OBJECTIVES = (LAC, MAX_THROUGHPUT, MIN_AOI, LOU2020)

# Variables below this fraction of their largest feasible value are reported as 0.
SNAP_REL = 1e-7


class SolverError(RuntimeError):
    def __init__(self, msg: str, diagnostics: Optional[SolverDiagnostics] = None):
        super().__init__(msg)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    kkt_tol: float = 1e-6
    max_iters: int = 2000
    t0: float = 1.0
    growth: float = 10.0
    newton_tol: float = 1e-9
    tie_break_epsilon: float = 1e-9

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.kkt_tol > 0:
            raise ValueError("kkt_tol must be > 0")


# -- problem assembly --------------------------------------------------------


def _incidence(net: Network, flows: Sequence[FlowSpec]) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Constraint matrix over the links actually used by ``flows``."""
    used = sorted({lid for f in flows for lid in f.path}, key=lambda lid: net.links.index(net.link(lid)))
    row = {lid: i for i, lid in enumerate(used)}
    A = np.zeros((len(used), len(flows)))
    for j, f in enumerate(flows):
        coef = f.size_bits if f.is_aoi else 1.0
        for lid in f.path:
            A[row[lid], j] = coef
    cap = np.array([net.link(lid).capacity_bps for lid in used])
    bad = [lid for lid, c in zip(used, cap) if not c > 0]
    if bad:
        raise SolverError(f"infeasible network: non-positive capacity on {', '.join(bad)}")
    return used, A, cap


def _initial_point(A: np.ndarray, cap: np.ndarray) -> np.ndarray:
    # Half of an equal split of each link, taken over the links a flow uses.
    count = (A > 0).sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(A > 0, cap[:, None] / (A * np.maximum(count, 1)), np.inf)
    return 0.5 * share.min(axis=0)


@dataclass
class _Smooth:
    """Separable objective to minimise: sum_j phi_j(x_j)."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]


def _linear(w: np.ndarray) -> _Smooth:
    return _Smooth(lambda x: float(w @ x), lambda x: w.copy(), lambda x: np.zeros_like(x))


def _inverse(lin: np.ndarray, inv: np.ndarray) -> _Smooth:
    """lin.x + sum inv_j / (2 x_j)."""
    on = inv > 0

    def _safe(fn):
        def f(x):
            out = np.zeros_like(x)
            out[on] = fn(x[on], inv[on])
            return out

        return f

    term = _safe(lambda x, c: c / (2 * x))
    slope = _safe(lambda x, c: c / (2 * x * x))
    curv = _safe(lambda x, c: c / x**3)
    return _Smooth(lambda x: float(lin @ x + term(x).sum()), lambda x: lin - slope(x), curv)


def _sumsq() -> _Smooth:
    return _Smooth(lambda x: float(x @ x), lambda x: 2 * x, lambda x: np.full_like(x, 2.0))


def _barrier_minimize(obj: _Smooth, G: np.ndarray, h: np.ndarray, x0: np.ndarray, cfg: SolverConfig):
    """Scaled front end of :func:`_ipm`: rows to unit right-hand side, columns to unit range."""
    rs = np.where(h > 0, 1 / np.where(h > 0, h, 1.0), 1.0)
    Gr = G * rs[:, None]
    pos = np.where(Gr > 0, Gr, 0.0)
    big = pos.max(axis=0)
    cs = np.where(big > 0, 1 / np.where(big > 0, big, 1.0), 1.0)
    Gs = Gr * cs[None, :]
    scaled = _Smooth(
        lambda y: obj.value(cs * y),
        lambda y: cs * obj.grad(cs * y),
        lambda y: cs * cs * obj.hess(cs * y),
    )
    hs, y0 = h * rs, x0 / cs
    goal = cfg.kkt_tol * 1e-2
    try:
        y, zs, iters = _ipm(scaled, Gs, hs, y0, cfg)
        res = _natural_residual(scaled, Gs, hs, y, zs)
    except SolverError:
        y, zs, iters, res = None, None, cfg.max_iters, math.inf
    if res > goal:
        # Fall back to the primal barrier, which is globally convergent.
        try:
            y2, z2, it2 = _primal_barrier(scaled, Gs, hs, y0, cfg)
        except SolverError:
            if y is None:
                raise
        else:
            iters += it2
            if y is None or _natural_residual(scaled, Gs, hs, y2, z2) < res:
                y, zs = y2, z2
    return cs * y, zs * rs, iters


def _primal_barrier(obj: _Smooth, G: np.ndarray, h: np.ndarray, x0: np.ndarray, cfg: SolverConfig):
    """Classic barrier path following: damped Newton on t*obj - sum log(slacks).

    Robust but limited in final accuracy, so each centre is polished and the
    best point by KKT residual is kept.  Returns (x, z, iterations).
    """
    x = x0.astype(float).copy()
    m = G.shape[0] + x.size
    t = cfg.t0
    total = 0
    best = None
    goal = cfg.kkt_tol * 1e-2

    def phi(v):
        sl = h - G @ v
        if np.any(sl <= 0) or np.any(v <= 0):
            return math.inf
        return t * obj.value(v) - float(np.sum(np.log(sl))) - float(np.sum(np.log(v)))

    while True:
        for _ in range(100):
            s = h - G @ x
            g = t * obj.grad(x) + G.T @ (1 / s) - 1 / x
            H = G.T @ ((1 / s**2)[:, None] * G)
            H[np.diag_indices_from(H)] += t * obj.hess(x) + 1 / x**2
            d = 1 / np.sqrt(np.diag(H))
            # least squares copes with the near-singular late-path Hessian
            dx = -d * np.linalg.lstsq(H * d[:, None] * d[None, :], d * g, rcond=None)[0]
            total += 1
            dec = float(-g @ dx)
            if not dec / 2 > cfg.newton_tol:
                break
            f0 = phi(x)
            a = 1.0
            if dec < 0.25:
                # near the centre: pure Newton, backing off only for feasibility
                while not math.isfinite(phi(x + a * dx)) and a > 1e-14:
                    a *= 0.5
            else:
                while phi(x + a * dx) > f0 - 0.25 * a * dec and a > 1e-14:
                    a *= 0.5
            if a <= 1e-14:
                break
            x = x + a * dx
        cand = _barrier_candidate(obj, G, h, x, t, m)
        if best is None or cand[2] < best[2]:
            best = cand
        if best[2] <= goal or m / t < 1e-11:
            break
        t *= cfg.growth
        if total > cfg.max_iters:
            raise SolverError(f"no convergence within {cfg.max_iters} Newton iterations")
    return best[0], best[1], total


def _barrier_candidate(obj, G, h, x, t, m):
    """Polished (x, z, residual) from a point on the barrier path."""
    z = 1 / (t * (h - G @ x))
    # Tiny slacks lose precision; refit z on clearly interior variables.
    free = x > math.sqrt(m / t)
    if np.any(free):
        zf = nnls(G[:, free].T, -obj.grad(x)[free])[0]
        if _natural_residual(obj, G, h, x, zf) < _natural_residual(obj, G, h, x, z):
            z = zf
    x, z = _polish(obj, G, h, x, z)
    return x, z, _natural_residual(obj, G, h, x, z)


def _ipm(obj: _Smooth, G: np.ndarray, h: np.ndarray, x0: np.ndarray, cfg: SolverConfig):
    """min obj(x) s.t. G x <= h, x >= 0 by a primal-dual interior-point method.

    Slacks s and multipliers z (rows of G) and w (bounds on x) are carried
    explicitly.  Each iteration solves the reduced Newton system once for a
    predictor and once for a centred corrector (Mehrotra's rule).  Returns
    (x, z, iterations).
    """
    x = x0.astype(float).copy()
    s = h - G @ x
    if np.any(s <= 0) or np.any(x <= 0):
        raise SolverError("starting point is not strictly feasible")
    m = G.shape[0] + x.size
    comp_goal = cfg.kkt_tol * 1e-2
    scale = max(1.0, float(np.max(np.abs(h), initial=0)))
    # Start the duals at a barrier weight matched to the gradient scale.
    mu0 = max(1 / cfg.t0, float(np.max(np.abs(obj.grad(x)) * x)))
    z = mu0 / s
    w = mu0 / x
    tau = 0.995
    stalled = 0
    last_alpha = 1.0
    best_score, best_it = math.inf, 0

    def step_len(pairs):
        alpha = 1.0
        for v, dv in pairs:
            neg = dv < 0
            if np.any(neg):
                with np.errstate(over="ignore"):
                    alpha = min(alpha, float(np.min(-v[neg] / dv[neg])))
        return alpha

    for it in range(1, cfg.max_iters + 1):
        gap = (s @ z + x @ w) / m
        grad = obj.grad(x)
        rd = grad + G.T @ z - w
        rp = G @ x + s - h
        # Dual residual components are weighted by their own gradient scale.
        wt = 1 / (1 + np.abs(grad))
        rd_w = float(np.max(np.abs(rd) * wt))
        comp = max(float(np.max(np.minimum(s, z), initial=0)), float(np.max(np.minimum(x, w))))
        if comp <= comp_goal and np.max(np.abs(rp), initial=0) <= 1e-12 * scale and rd_w <= comp_goal:
            return _polish(obj, G, h, x, z) + (it - 1,)
        # No progress on the residual for a while: the round-off floor.
        score = max(comp, rd_w)
        if score < 0.9 * best_score:
            best_score, best_it = score, it
        elif it - best_it >= (10 if best_score <= cfg.kkt_tol else 50):
            return _polish(obj, G, h, x, z) + (it,)
        H = G.T @ ((z / s)[:, None] * G)
        H[np.diag_indices_from(H)] += obj.hess(x) + w / x
        d = 1 / np.sqrt(np.diag(H))
        Hs = H * d[:, None] * d[None, :]
        try:
            fac = cho_factor(Hs)

            def lin_solve(r):
                return d * cho_solve(fac, d * r)

        except np.linalg.LinAlgError:

            def lin_solve(r):
                return d * np.linalg.lstsq(Hs, d * r, rcond=None)[0]

        hx = obj.hess(x)

        def solve_full(r_d, r_p, rcs, rcx):
            dx = lin_solve(-r_d - G.T @ ((z * r_p - rcs) / s) - rcx / x)
            ds = -r_p - G @ dx
            return dx, ds, (-rcs - z * ds) / s, (-rcx - w * dx) / x

        def direction(rcs, rcx):
            dx, ds, dz, dw = solve_full(rd, rp, rcs, rcx)
            # Iterative refinement against the unreduced stationarity rows.
            zero_p, zero_s, zero_x = np.zeros_like(rp), np.zeros_like(s), np.zeros_like(x)
            for _ in range(2):
                e = hx * dx + G.T @ dz - dw + rd
                c = solve_full(e, zero_p, zero_s, zero_x)
                dx, ds, dz, dw = dx - c[0], ds - c[1], dz - c[2], dw - c[3]
            return dx, ds, dz, dw

        dx, ds, dz, dw = direction(s * z, x * w)
        a_aff = step_len(((x, dx), (s, ds), (z, dz), (w, dw)))
        mu_aff = ((s + a_aff * ds) @ (z + a_aff * dz) + (x + a_aff * dx) @ (w + a_aff * dw)) / m
        sigma = min(1.0, (mu_aff / gap) ** 3) if gap > 0 else 0.0
        if last_alpha < 0.1:
            # Short steps mean the iterate left the central path; recentre.
            sigma = max(sigma, 0.5)
        # Keep complementarity from outrunning dual feasibility.
        target = sigma * gap
        if rd_w > comp_goal:
            target = max(target, min(gap, 0.1 * rd_w))
        dx, ds, dz, dw = direction(s * z + ds * dz - target, x * w + dx * dw - target)
        if not np.all(np.isfinite(dx)):
            raise SolverError("Newton system became numerically singular")
        alpha = min(1.0, tau * step_len(((x, dx), (s, ds), (z, dz), (w, dw))))
        # Backtrack until the dual residual or the full residual norm shrinks.
        def merit(xv, sv, zv, wv):
            r_d = obj.grad(xv) + G.T @ zv - wv
            r_p = G @ xv + sv - h
            return float(r_d @ r_d + r_p @ r_p + np.sum((sv * zv - target) ** 2) + np.sum((xv * wv - target) ** 2))

        m0 = merit(x, s, z, w)
        rd_norm = rd_w
        rd_floor = comp_goal
        while True:
            xn = x + alpha * dx
            zn, wn = z + alpha * dz, w + alpha * dw
            rdn = float(np.max(np.abs(obj.grad(xn) + G.T @ zn - wn) * wt))
            if rdn <= max((1 - 0.01 * alpha) * rd_norm, rd_floor) or alpha < 1e-12:
                break
            if merit(xn, s + alpha * ds, zn, wn) <= (1 - 0.01 * alpha) * m0:
                break
            alpha *= 0.5
        log.debug("ipm %d gap=%.3g |rp|=%.3g |rd|=%.3g alpha=%.3g sigma=%.3g", it, gap, np.max(np.abs(rp), initial=0), rd_norm, alpha, sigma)
        last_alpha = alpha
        x = xn
        s = s + alpha * ds
        z = z + alpha * dz
        w = w + alpha * dw
        # Progress has stopped (round-off floor); polish and let the caller judge the residual.
        stalled = stalled + 1 if alpha < 1e-6 else 0
        if stalled >= 5:
            return _polish(obj, G, h, x, z) + (it,)
    raise SolverError(f"no convergence within {cfg.max_iters} Newton iterations")


def _natural_residual(obj: _Smooth, G: np.ndarray, h: np.ndarray, x: np.ndarray, z: np.ndarray) -> float:
    red = obj.grad(x) + G.T @ z
    slack = h - G @ x
    return max(
        float(np.max(np.abs(np.minimum(x, red)))),
        float(np.max(np.abs(np.minimum(slack, z)), initial=0)),
        float(np.max(-slack, initial=0)),
    )


def _polish(obj: _Smooth, G: np.ndarray, h: np.ndarray, x: np.ndarray, z: np.ndarray, iters: int = 20):
    """Newton on the KKT equations of the active set guessed from (x, z).

    Interior iterates stall near degenerate vertices where the reduced system
    is badly conditioned; fixing the active constraints removes the barrier
    terms.  The polished point is kept only if its natural residual is lower.
    Repeated while the active-set guess keeps improving.
    """
    res = _natural_residual(obj, G, h, x, z)
    for _ in range(5):
        x1, z1 = _polish_once(obj, G, h, x, z, iters)
        r1 = _natural_residual(obj, G, h, x1, z1)
        if not r1 < 0.5 * res:
            if r1 < res:
                x, z = x1, z1
            break
        x, z, res = x1, z1, r1
    return x, z


def _polish_once(obj, G, h, x, z, iters):
    slack = h - G @ x
    red = obj.grad(x) + G.T @ z
    act = z > slack
    free = x > red
    # Degenerate pairs (both sides still sizeable) are also tried as active.
    amb_row = np.minimum(slack, z) > np.maximum(1e-3 * np.maximum(slack, z), 1e-12)
    amb_var = np.minimum(x, red) > np.maximum(1e-3 * np.maximum(x, red), 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        x1, z1 = _polish_on(obj, G, h, x, z, act, free, iters)
        if amb_row.any() or amb_var.any():
            x2, z2 = _polish_on(obj, G, h, x, z, act | amb_row, free | amb_var, iters)
            if _natural_residual(obj, G, h, x2, z2) < _natural_residual(obj, G, h, x1, z1):
                return x2, z2
        return x1, z1


def _polish_on(obj, G, h, x, z, act, free, iters):
    """Active-set Newton: blocking variables leave the free set, rows with
    negative multipliers leave the active set."""
    best = (_natural_residual(obj, G, h, x, z), x, z)
    free, act = free.copy(), act.copy()
    xx = np.where(free, x, 0.0)
    zz = np.where(act, z, 0.0)
    for _ in range(iters + int(free.sum()) + int(act.sum())):
        if not free.any():
            break
        Ga = G[np.ix_(act, free)]
        na = int(act.sum())
        xf = xx[free]
        r1 = obj.grad(xx)[free] + Ga.T @ zz[act]
        r2 = Ga @ xf - h[act]
        if max(np.max(np.abs(r1), initial=0), np.max(np.abs(r2), initial=0)) < 1e-15:
            if np.any(zz[act] < 0):
                act[np.flatnonzero(act)[np.argmin(zz[act])]] = False
                continue
            break
        K = np.block([[np.diag(obj.hess(xx)[free]), Ga.T], [Ga, np.zeros((na, na))]])
        step = np.linalg.lstsq(K, -np.concatenate([r1, r2]), rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        dx = step[: xf.size]
        neg = dx < 0
        ratio = np.where(neg, -xf / np.where(neg, dx, -1.0), np.inf)
        a = min(1.0, float(ratio.min()))
        idx = np.flatnonzero(free)
        xx[idx] = xf + a * dx
        zz[act] = zz[act] + a * step[xf.size :]
        if a < 1.0:
            # the blocking variable sits at its bound from now on
            k = idx[int(np.argmin(ratio))]
            xx[k] = 0.0
            free[k] = False
        xo = np.maximum(xx, 0.0)
        zo = np.maximum(zz, 0.0)
        if np.all(np.isfinite(xo)) and np.all(np.isfinite(zo)):
            res = _natural_residual(obj, G, h, xo, zo)
            if res < best[0]:
                best = (res, xo, zo)
    return best[1], best[2]


# -- allocation assembly -----------------------------------------------------


def link_loads(values: dict, net: Network, flows: Sequence[FlowSpec]) -> dict[str, tuple[float, float]]:
    """Per-link (S_LDA, S_AoI) for every link of ``net``.

    ``values`` may be a RateAllocation or a plain {flow id: value} mapping.
    """
    vals = values.values if isinstance(values, RateAllocation) else values
    loads = {l.id: [0.0, 0.0] for l in net.links}
    for f in flows:
        v = vals[f.id]
        for lid in f.path:
            if lid not in loads:
                raise KeyError(f"flow {f.id} references unknown link {lid}")
            if f.is_aoi:
                loads[lid][1] += v * f.size_bits
            else:
                loads[lid][0] += v
    return {k: (a, b) for k, (a, b) in loads.items()}


def aoi_ratio(s_lda_bps: float, s_aoi_bps: float) -> float:
    """Share of planned link traffic that belongs to AoI flows; 1 on an unloaded link."""
    if s_lda_bps < 0 or s_aoi_bps < 0:
        raise ValueError("loads must be non-negative")
    total = s_lda_bps + s_aoi_bps
    if total <= 0:
        return 1.0
    return s_aoi_bps / total


def aoi_upper_bound(flow: FlowSpec, alloc: Optional[RateAllocation], net: Network) -> float:
    """Worst-case AoI achievable for a feasible allocation: (1 + 2|f|) / (2 mu_f) + d_f."""
    mu = alloc.value(flow.id) if alloc is not None else (flow.freq_hz or 0.0)
    if not mu > 0:
        raise ValueError(f"AoI bound undefined for zero update frequency (flow {flow.id})")
    if math.isinf(mu):
        return total_latency(flow, net)
    return (1 + 2 * flow.hops) / (2 * mu) + total_latency(flow, net)


def objective_value(values: dict, flows: Sequence[FlowSpec], objective: str, lam: float = 0.0, s_lda: float = 1.0) -> float:
    lda = [values[f.id] for f in flows if not f.is_aoi]
    aoi = [values[f.id] for f in flows if f.is_aoi]

    def inv(v, w=1.0):
        return math.inf if v <= 0 else w / (2 * v)

    if objective == LAC:
        pen = 0.0 if lam == 0 else sum(inv(v) for v in aoi)
        return sum(lda) - lam * pen
    if objective == MAX_THROUGHPUT:
        return sum(lda) + sum(values[f.id] * f.size_bits for f in flows if f.is_aoi)
    if objective == MIN_AOI:
        return sum(inv(v, s_lda) for v in lda) + sum(inv(v) for v in aoi)
    if objective == LOU2020:
        return sum(inv(v) for v in aoi)
    raise ValueError(f"unknown objective: {objective}")


def _finish(net, flows, x_by_id, objective, lam, s_lda, diag) -> RateAllocation:
    values = {f.id: float(x_by_id.get(f.id, 0.0)) for f in flows}
    if not all(math.isfinite(v) for v in values.values()):
        raise SolverError("solver produced non-finite values", diag)
    loads = link_loads(values, net, flows)
    gamma = {lid: aoi_ratio(*ld) for lid, ld in loads.items()}
    for lid, (a, b) in loads.items():
        diag.slack[lid] = net.link(lid).capacity_bps - a - b
    diag.epigraph = {f.id: (1 / values[f.id] if values[f.id] > 0 else math.inf) for f in flows if f.is_aoi}
    alloc = RateAllocation(
        values=values,
        loads=loads,
        gamma=gamma,
        objective_value=objective_value(values, flows, objective, lam, s_lda),
        lam=lam,
        objective=objective,
        diagnostics=diag,
    )
    diag.kkt_residual = kkt_residual(alloc, net, flows, objective, lam, s_lda=s_lda)
    return alloc


def _snap(x: np.ndarray, A: np.ndarray, cap: np.ndarray, keep: Optional[np.ndarray] = None) -> np.ndarray:
    """Zero out round-off sized values; ``keep`` marks variables that must stay positive."""
    bound = np.min(np.where(A > 0, cap[:, None] / np.where(A > 0, A, 1.0), np.inf), axis=0)
    small = x < SNAP_REL * bound
    if keep is not None:
        small &= ~keep
    return np.where(small, 0.0, x)


def _solve_separable(net, flows, var_flows, obj, cfg, objective, lam, s_lda, inv_mask=None) -> RateAllocation:
    diag = SolverDiagnostics()
    if not var_flows:
        return _finish(net, flows, {}, objective, lam, s_lda, diag)
    used, A, cap = _incidence(net, var_flows)
    x, duals, iters = _barrier_minimize(obj, A, cap, _initial_point(A, cap), cfg)
    diag.iterations = iters
    diag.duals = {lid: float(p) for lid, p in zip(used, duals[: len(used)])}
    x = _snap(x, A, cap, keep=inv_mask)
    alloc = _finish(net, flows, {f.id: v for f, v in zip(var_flows, x)}, objective, lam, s_lda, diag)
    if diag.kkt_residual > cfg.kkt_tol:
        log.warning("%s: KKT residual %.3g above tolerance %.3g", objective, diag.kkt_residual, cfg.kkt_tol)
    return alloc


def solve_lac(net: Network, flows: Sequence[FlowSpec], cfg: SolverConfig) -> RateAllocation:
    """Maximise sum r_f - lam * sum 1/(2 mu_f) under the link capacities."""
    lam = cfg.lam
    # With lam = 0 the frequencies do not enter the objective; they are pinned to 0.
    var = [f for f in flows if not f.is_aoi or lam > 0]
    lin = np.array([0.0 if f.is_aoi else -1.0 for f in var])
    inv = np.array([lam if f.is_aoi else 0.0 for f in var])
    return _solve_separable(net, flows, var, _inverse(lin, inv), cfg, LAC, lam, 1.0, inv_mask=inv > 0)


def solve_min_aoi(net: Network, flows: Sequence[FlowSpec], cfg: SolverConfig, s_lda: float = 1.0) -> RateAllocation:
    """Minimise sum s_LDA/(2 r_f) + sum 1/(2 mu_f)."""
    inv = np.array([1.0 if f.is_aoi else float(s_lda) for f in flows])
    return _solve_separable(net, flows, list(flows), _inverse(np.zeros(len(flows)), inv), cfg, MIN_AOI, cfg.lam, s_lda, inv_mask=inv > 0)


def solve_lou2020(net: Network, flows: Sequence[FlowSpec], cfg: SolverConfig) -> RateAllocation:
    """AoI-only allocation: LDA flows get 0, AoI frequencies minimise sum 1/(2 mu_f).

    The route/throughput alternation of the original method collapses to its
    first pass when routes are fixed: the throughput target only moves the
    routing, so the AoI-minimal frequencies are the fixed point.
    """
    aoi = [f for f in flows if f.is_aoi]
    inv = np.ones(len(aoi))
    alloc = _solve_separable(net, flows, aoi, _inverse(np.zeros(len(aoi)), inv), cfg, LOU2020, cfg.lam, 1.0, inv_mask=inv > 0)
    return alloc


def _least_distance(G: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Minimum-norm x with G x >= h, via the classic reduction to NNLS.

    With E = [G^T; h^T] and f = e_{n+1}, the NNLS residual r = E u - f gives
    x = -r[:n] / r[n]; a zero residual means the constraints are infeasible.
    """
    n = G.shape[1]
    # Row scaling keeps the feasible set; scaling h by k scales x by k.
    norm = np.linalg.norm(G, axis=1)
    norm[norm == 0] = 1.0
    Gs = G / norm[:, None]
    hs = h / norm
    k = max(1.0, float(np.max(np.abs(hs))))
    E = np.vstack([Gs.T, hs[None, :] / k])
    f = np.zeros(n + 1)
    f[n] = 1.0
    u, _ = nnls(E, f, maxiter=50 * E.shape[1])
    r = E @ u - f
    if abs(r[n]) < 1e-14:
        raise SolverError("least-distance subproblem is infeasible")
    return -k * r[:n] / r[n]


def solve_max_throughput(net: Network, flows: Sequence[FlowSpec], cfg: SolverConfig) -> RateAllocation:
    """Maximise sum r_f + sum mu_f s_f; the minimum-norm optimum is returned.

    This is the vanishing-epsilon limit of the epsilon*sum(x^2) regularised
    program, computed lexicographically: the LP by the interior-point method,
    then the smallest-norm point of the optimal face.  The face is read off
    the strictly complementary interior-point duals (priced links tight,
    flows with positive reduced cost at zero).
    """
    flows = list(flows)
    diag = SolverDiagnostics()
    if not flows:
        return _finish(net, flows, {}, MAX_THROUGHPUT, cfg.lam, 1.0, diag)
    used, A, cap = _incidence(net, flows)
    w = np.array([f.size_bits if f.is_aoi else 1.0 for f in flows])
    x1, duals, it1 = _barrier_minimize(_linear(-w), A, cap, _initial_point(A, cap), cfg)
    n = len(flows)
    tight = duals > cap - A @ x1
    zero = A.T @ duals - w > x1
    G = np.vstack([np.eye(n), -np.eye(n)[zero], A[tight], -A])
    h = np.concatenate([np.zeros(n), np.zeros(int(zero.sum())), cap[tight], -cap])
    try:
        x2 = _least_distance(G, h)
    except SolverError:
        x2 = x1
    x2 = np.maximum(x2, 0.0)
    # Round-off can leave a saturated link marginally over capacity.
    over = float(np.max((A @ x2) / cap))
    if over > 1:
        x2 = x2 / over
    if not (over <= 1 + 1e-9 and float(w @ x2) >= float(w @ x1) * (1 - cfg.tie_break_epsilon)):
        log.warning("max_throughput: optimal-face projection inaccurate; keeping the LP point")
        x2 = x1
    diag.iterations = it1
    diag.duals = {lid: float(p) for lid, p in zip(used, duals)}
    x2 = _snap(x2, A, cap)
    return _finish(net, flows, {f.id: v for f, v in zip(flows, x2)}, MAX_THROUGHPUT, cfg.lam, 1.0, diag)


def solve(objective: str, net: Network, flows: Sequence[FlowSpec], cfg: SolverConfig, s_lda: float = 1.0) -> RateAllocation:
    if objective == LAC:
        return solve_lac(net, flows, cfg)
    if objective == MAX_THROUGHPUT:
        return solve_max_throughput(net, flows, cfg)
    if objective == MIN_AOI:
        return solve_min_aoi(net, flows, cfg, s_lda)
    if objective == LOU2020:
        return solve_lou2020(net, flows, cfg)
    raise ValueError(f"unknown objective: {objective}")


# -- optimality check --------------------------------------------------------


def _max_gradient(x: np.ndarray, flows: Sequence[FlowSpec], objective: str, lam: float, s_lda: float) -> np.ndarray:
    """Gradient of the objective written as a maximisation."""
    g = np.zeros(len(flows))
    with np.errstate(divide="ignore"):
        for j, f in enumerate(flows):
            v = x[j]
            if objective == LAC:
                g[j] = (lam / (2 * v * v) if lam > 0 else 0.0) if f.is_aoi else 1.0
            elif objective == MAX_THROUGHPUT:
                g[j] = f.size_bits if f.is_aoi else 1.0
            elif objective == MIN_AOI:
                g[j] = (1.0 if f.is_aoi else s_lda) / (2 * v * v)
            elif objective == LOU2020:
                g[j] = 1 / (2 * v * v)
            else:
                raise ValueError(f"unknown objective: {objective}")
    return g


def feasibility_violation(alloc: RateAllocation, net: Network, flows: Sequence[FlowSpec]) -> float:
    """Largest relative capacity overshoot over all links (0 when feasible)."""
    loads = link_loads(alloc.values, net, flows)
    worst = 0.0
    for lid, (a, b) in loads.items():
        c = net.link(lid).capacity_bps
        worst = max(worst, (a + b - c) / c)
    neg = min([0.0] + list(alloc.values.values()))
    return max(worst, -neg)


def kkt_residual(
    alloc: RateAllocation,
    net: Network,
    flows: Sequence[FlowSpec],
    objective: str,
    lam: float,
    s_lda: float = 1.0,
    active_tol: float = 1e-7,
) -> float:
    """Natural KKT residual of an allocation for the named objective.

    Link prices are chosen to minimise the worst stationarity violation, so
    a non-unique dual does not inflate the value.  The
    residual is the largest of |min(x_j, reduced cost_j)| and
    |min(slack_l, price_l)|; it vanishes exactly at a KKT point.  Capacity
    overshoot is reported by :func:`feasibility_violation`.
    """
    if objective == LOU2020:
        var = [f for f in flows if f.is_aoi]
    elif objective == LAC and lam == 0:
        var = [f for f in flows if not f.is_aoi]
    else:
        var = list(flows)
    if not var:
        return 0.0
    used, A, cap = _incidence(net, var)
    x = np.array([alloc.value(f.id) for f in var])
    g = _max_gradient(x, var, objective, lam, s_lda)
    if not np.all(np.isfinite(g)):
        return math.inf
    slack = cap - A @ x
    bound = np.min(np.where(A > 0, cap[:, None] / np.where(A > 0, A, 1.0), np.inf), axis=0)
    pos = x > active_tol * bound
    # Variables behind an inverse term are positive at any finite objective.
    pos |= np.array([objective in (MIN_AOI, LOU2020) or (objective == LAC and f.is_aoi) for f in var])

    def residual(active):
        p = np.zeros(len(used))
        if active.any():
            p[active] = _fit_prices(A[active], g, pos)
        reduced = A.T @ p - g
        res_x = np.abs(np.minimum(x, reduced))
        res_l = np.abs(np.minimum(slack, p))
        return float(max(res_x.max(initial=0.0), res_l.max(initial=0.0)))

    # The residual is an infimum over multipliers; which links may carry a
    # price is part of that choice.  Start from the nearly tight links, then
    # try growing prefixes in slack order while they can still improve it.
    best = residual(slack <= active_tol * np.maximum(cap, 1e-300))
    order = np.argsort(slack)
    for k in range(1, len(order) + 1):
        if slack[order[k - 1]] >= best:
            break
        active = np.zeros(len(used), dtype=bool)
        active[order[:k]] = True
        best = min(best, residual(active))
    return best


def _fit_prices(A_act: np.ndarray, g: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Prices p >= 0 minimising max(|(A^T p - g)_pos|, max(0, g - A^T p)_zero)."""
    k = A_act.shape[0]
    At = A_act.T
    # Variables (p, t); minimise t.
    rows = [np.hstack([At[pos], -np.ones((pos.sum(), 1))]), np.hstack([-At, -np.ones((len(g), 1))])]
    rhs = [g[pos], -g]
    c = np.zeros(k + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs), bounds=[(0, None)] * (k + 1), method="highs")
    if res.status == 0:
        return res.x[:k]
    if not pos.any():
        return np.zeros(k)
    return nnls(At[pos], g[pos])[0]
