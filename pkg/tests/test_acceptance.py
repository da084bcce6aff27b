"""Acceptance suite: each test checks one criterion and records a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in an
"acceptance criteria" section at the end of the session.
"""

import random
import time
import warnings

import numpy as np
import pytest

from aoinet.aaq import FifoQueue, IfilQueue, Packet, Enq
from aoinet.closed_form import RegimeWarning, SingleLinkParams, sdm_aoi, sdm_throughput, tdm_aoi, tdm_throughput
from aoinet.fate import SolverConfig, aoi_upper_bound, solve_lac, solve_min_aoi
from aoinet.harness import builtin_topology_path, run_compare
from aoinet.model import AOI, LDA, FlowSpec, Link, Network, load_topology, propagation_delay
from aoinet.sim import GREEDY, Scenario, SchedulerSpec, TrafficSpec, run

pytestmark = pytest.mark.slow


def single_link(capacity=1.0, latency=0.0):
    return Network(("s", "d"), (Link("l", "s", "d", capacity, latency),))


def line_network(caps, latencies=None):
    nodes = tuple(f"n{i}" for i in range(len(caps) + 1))
    lat = latencies or [0.0] * len(caps)
    links = tuple(Link(f"l{i}", nodes[i], nodes[i + 1], c, d) for i, (c, d) in enumerate(zip(caps, lat)))
    return Network(nodes, links)


def pulse_train_aoi(t_i, d_t, scheduler, periods=10_000):
    net = single_link()
    f = FlowSpec("u", AOI, ("l",), d_t, freq_hz=1 / t_i)
    rep = run(Scenario(net, (f,), SchedulerSpec(scheduler), duration_s=periods * t_i))
    return rep.aoi_s["u"]


# -- 1 ----------------------------------------------------------------------


def test_pulse_train_reported_values(acceptance_report):
    t0 = time.perf_counter()
    ifil = pulse_train_aoi(1.0, 1.9, "PriorityAoI")
    oracle = pulse_train_aoi(1.0, 1.9, "WaitingOracle")
    dt = time.perf_counter() - t0
    ok_ifil = abs(ifil - 3.74) <= 0.02
    ok_oracle = abs(oracle - 2.9) <= 0.02
    ok = ok_ifil and ok_oracle and dt < 1.0
    acceptance_report(
        "[01] pulse-train ages",
        ok,
        f"IFIL {ifil:.4f} (want 3.74 +/- 0.02), waiting oracle {oracle:.4f} (want 2.9 +/- 0.02)",
        dt,
    )
    assert ok_oracle
    assert ok_ifil, f"IFIL pulse-train AoI {ifil:.4f} differs from 3.74"
    assert dt < 1.0


# -- 2 ----------------------------------------------------------------------


def test_empty_network_identity(acceptance_report):
    rng = random.Random(2)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(20):
        hops = 1 + k % 3
        mu = rng.uniform(0.1, 10.0)
        s = rng.choice([1.0, 100.0, 12000.0])
        # Capacity high enough that one update clears a hop before the next arrives.
        caps = [s * mu * rng.uniform(2.0, 50.0) for _ in range(hops)]
        lats = [rng.uniform(0.0, 0.1) for _ in range(hops)]
        net = line_network(caps, lats)
        f = FlowSpec("u", AOI, tuple(l.id for l in net.links), s, freq_hz=mu)
        rep = run(Scenario(net, (f,), SchedulerSpec("SDM"), duration_s=200 / mu))
        expect = 1 / (2 * mu) + propagation_delay(f, net)
        worst = max(worst, abs(rep.aoi_s["u"] / expect - 1))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 5.0
    acceptance_report("[02] empty-network identity", ok, f"worst relative error {worst:.2e} over 20 points", dt)
    assert ok


# -- 3 ----------------------------------------------------------------------

GRID = 1e-3


def random_small_instance(rng):
    n_links = rng.randint(1, 3)
    caps = [round(rng.uniform(0.5, 1.5), 3) for _ in range(n_links)]
    net = line_network(caps)
    ids = [l.id for l in net.links]
    flows = []
    for j in range(rng.randint(1, 3)):
        a = rng.randrange(n_links)
        b = rng.randint(a + 1, n_links)
        flows.append(FlowSpec(f"f{j}", rng.choice([LDA, AOI]), tuple(ids[a:b]), 1.0))
    return net, flows


def grid_oracle(net, flows, value):
    """Best objective over the lattice of step GRID inside the feasible set.

    ``value(f, x)`` is each flow's objective term, increasing in x.  The first
    n-1 variables are enumerated exhaustively; monotonicity makes the last
    one's best lattice point its largest feasible one.
    """
    caps = {l.id: l.capacity_bps for l in net.links}
    ub = [min(caps[l] for l in f.path) for f in flows]
    axes = [np.arange(0.0, u + GRID / 2, GRID) for u in ub[:-1]]
    mesh = np.meshgrid(*axes, indexing="ij") if axes else []
    shape = mesh[0].shape if mesh else ()
    room = np.full(shape, np.inf)
    for lid, c in caps.items():
        load = np.zeros(shape)
        for f, x in zip(flows[:-1], mesh):
            if lid in f.path:
                load = load + x
        if lid in flows[-1].path:
            room = np.minimum(room, c - load)
        else:
            room = np.where(load <= c + 1e-12, room, -np.inf)
    last = np.floor(np.round(room / GRID, 6)) * GRID
    total = np.zeros(shape)
    with np.errstate(divide="ignore"):
        for f, x in zip(flows[:-1], mesh):
            total = total + value(f, x)
        total = total + value(flows[-1], np.where(last > 0, last, 0.0))  # no -0.0
    total = np.where(last >= 0, total, -np.inf)
    return float(np.max(total))


def test_solver_matches_grid_oracle(acceptance_report):
    rng = random.Random(3)
    t0 = time.perf_counter()
    worst_gap, worst_kkt, failures = 0.0, 0.0, []
    for k in range(50):
        net, flows = random_small_instance(rng)
        lam = rng.choice([0.03125, 0.125, 0.5])
        s_lda = rng.choice([1.0, 4.0])

        def lac_term(f, x, lam=lam):
            return x if f.cls == LDA else -lam / (2 * x)

        def min_aoi_term(f, x, s_lda=s_lda):
            return -(s_lda if f.cls == LDA else 1.0) / (2 * x)

        for name, alloc, term in (
            ("lac", solve_lac(net, flows, SolverConfig(lam=lam)), lac_term),
            ("min_aoi", solve_min_aoi(net, flows, SolverConfig(), s_lda=s_lda), min_aoi_term),
        ):
            got = sum(float(term(f, alloc.value(f.id))) for f in flows)
            best = grid_oracle(net, flows, term)
            gap = abs(got - best)
            worst_gap = max(worst_gap, gap)
            worst_kkt = max(worst_kkt, alloc.diagnostics.kkt_residual)
            if gap > 1e-3 or alloc.diagnostics.kkt_residual > 1e-6:
                failures.append((k, name, gap, alloc.diagnostics.kkt_residual))
    dt = time.perf_counter() - t0
    ok = not failures and dt < 60.0
    acceptance_report(
        "[03] solver vs grid oracle",
        ok,
        f"100 solves, worst objective gap {worst_gap:.2e}, worst KKT residual {worst_kkt:.2e}",
        dt,
    )
    assert not failures, failures[:5]
    assert dt < 60.0


# -- 4 ----------------------------------------------------------------------


def test_lambda_monotonicity(acceptance_report):
    net = line_network([2.0, 1.5, 3.0, 1.0, 2.5])
    L = [l.id for l in net.links]
    flows = [
        FlowSpec("r1", LDA, tuple(L[0:2]), 1.0),
        FlowSpec("r2", LDA, tuple(L[1:4]), 1.0),
        FlowSpec("r3", LDA, tuple(L[3:5]), 1.0),
        FlowSpec("r4", LDA, (L[2],), 1.0),
        FlowSpec("a1", AOI, tuple(L[0:3]), 1.0),
        FlowSpec("a2", AOI, tuple(L[2:5]), 2.0),
        FlowSpec("a3", AOI, (L[4],), 1.0),
    ]
    lams = [0.01, 0.03125, 0.0625, 0.125, 0.25, 0.5, 1.0, 2.0]
    t0 = time.perf_counter()
    thr, age = [], []
    for lam in lams:
        a = solve_lac(net, flows, SolverConfig(lam=lam))
        thr.append(sum(a.value(f.id) for f in flows if f.cls == LDA))
        age.append(sum(1 / (2 * a.value(f.id)) for f in flows if f.cls == AOI))
    dt = time.perf_counter() - t0
    mono = all(b <= a for a, b in zip(thr, thr[1:])) and all(b <= a for a, b in zip(age, age[1:]))
    ok = mono and dt < 10.0
    acceptance_report(
        "[04] lambda monotonicity",
        ok,
        f"sum r {thr[0]:.4f} -> {thr[-1]:.4f}, sum 1/(2mu) {age[0]:.4f} -> {age[-1]:.4f} over 8 lambdas",
        dt,
    )
    assert mono, (thr, age)
    assert dt < 10.0


# -- 5 ----------------------------------------------------------------------


def closed_form_errors(scheme, gamma, d_t, t_f, s_lda, duration):
    net = single_link()
    u = FlowSpec("u", AOI, ("l",), d_t, freq_hz=1.0)
    x = FlowSpec("x", LDA, ("l",), s_lda)
    sc = Scenario(
        net,
        (u, x),
        SchedulerSpec(scheme, frame_s=t_f, gamma=gamma),
        duration_s=duration,
        lda_mode=GREEDY,
        greedy_window=2,
    )
    rep = run(sc)
    p = SingleLinkParams(C=1.0, T_i=1.0, T_f=t_f, d_t=d_t, gamma=gamma)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RegimeWarning)
        if scheme == "SDM":
            thr, aoi = sdm_throughput(p), sdm_aoi(p)
        else:
            thr, aoi = tdm_throughput(p), tdm_aoi(p)
    return rep.throughput_bps["x"] / thr - 1, rep.aoi_s["u"] / aoi - 1


def test_closed_form_agreement(acceptance_report):
    rng = random.Random(1)
    t0 = time.perf_counter()
    errs = []
    for _ in range(10):
        g = rng.uniform(0.2, 0.8)
        d = g * rng.uniform(1.2, 3.0)
        errs.append(("SDM", closed_form_errors("SDM", g, d, 10.0, d / 20, 2000.0)))
    for _ in range(10):
        g = rng.uniform(0.1, 0.5)
        d = rng.uniform(0.05, 0.15)
        t_f = rng.uniform(20.0, 40.0)
        errs.append(("TDM", closed_form_errors("TDM", g, d, t_f, 0.05, 3000.0)))
    dt = time.perf_counter() - t0
    worst = {s: max(max(abs(a), abs(b)) for k, (a, b) in errs if k == s) for s in ("SDM", "TDM")}
    ok = max(worst.values()) <= 0.05 and dt < 60.0
    acceptance_report(
        "[05] closed form vs simulation",
        ok,
        f"worst relative error SDM {worst['SDM']:.4f}, TDM {worst['TDM']:.4f} (limit 0.05)",
        dt,
    )
    assert max(worst.values()) <= 0.05, errs
    assert dt < 60.0


# -- 6 ----------------------------------------------------------------------


def test_bounded_age_under_share_oracle(acceptance_report):
    rng = random.Random(6)
    t0 = time.perf_counter()
    worst = -np.inf
    checked = 0
    for _ in range(25):
        hops = rng.randint(1, 4)
        net = line_network(
            [rng.uniform(0.5, 2.0) for _ in range(hops)],
            [rng.choice([0.0, 0.01, 0.1]) for _ in range(hops)],
        )
        ids = [l.id for l in net.links]
        flows = []
        for j in range(rng.randint(1, 4)):
            a = rng.randrange(hops)
            b = rng.randint(a + 1, hops)
            cls = rng.choice([LDA, AOI]) if j else AOI
            flows.append(FlowSpec(f"f{j}", cls, tuple(ids[a:b]), rng.choice([0.1, 0.2, 0.5])))
        alloc = solve_lac(net, flows, SolverConfig(lam=rng.choice([0.03125, 0.125, 0.5])))
        slowest = min(alloc.value(f.id) for f in flows if f.cls == AOI)
        sc = Scenario(net, tuple(flows), SchedulerSpec("PerFlowShare"), allocation=alloc, duration_s=200 / slowest)
        rep = run(sc)
        for f in flows:
            if f.cls == AOI:
                worst = max(worst, rep.aoi_s[f.id] - aoi_upper_bound(f, alloc, net))
                checked += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 120.0
    acceptance_report(
        "[06] bounded age under per-flow shares",
        ok,
        f"{checked} AoI flows, worst (measured - bound) {worst:.2e}",
        dt,
    )
    assert worst <= 1e-9
    assert dt < 120.0


# -- 7 ----------------------------------------------------------------------


def test_ifil_gap_to_waiting_oracle(acceptance_report):
    rng = random.Random(7)
    t0 = time.perf_counter()
    worst = -np.inf
    for _ in range(30):
        t_i = rng.uniform(0.5, 2.0)
        d_t = t_i * rng.uniform(0.05, 3.0)
        ifil = pulse_train_aoi(t_i, d_t, "PriorityAoI", periods=2000)
        oracle = pulse_train_aoi(t_i, d_t, "WaitingOracle", periods=2000)
        worst = max(worst, ifil - oracle - t_i / 2)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 60.0
    acceptance_report("[07] IFIL within T_i/2 of waiting oracle", ok, f"worst excess over T_i/2 {worst:.3e}", dt)
    assert worst <= 1e-6
    assert dt < 60.0


# -- 8 ----------------------------------------------------------------------


def test_share_convergence(acceptance_report):
    net = single_link()
    aoi_bits, lda_bits, frame = 0.1, 0.2, 10.0
    aoi = [FlowSpec(f"a{i}", AOI, ("l",), aoi_bits, freq_hz=1.0, phase_s=0.05 * i) for i in range(20)]
    lda = [FlowSpec("x", LDA, ("l",), lda_bits)]
    quantum = max(aoi_bits, lda_bits)
    t0 = time.perf_counter()
    worst = {"SDM": 0.0, "TDM": 0.0}
    for scheme in ("SDM", "TDM"):
        for k in range(1, 10):
            g = k / 10
            sc = Scenario(
                net,
                tuple(aoi + lda),
                SchedulerSpec(scheme, frame_s=frame, gamma=g),
                duration_s=1000.0,
                lda_mode=GREEDY,
                greedy_window=2,
            )
            busy = run(sc).log.busy["l"]
            if scheme == "SDM":
                total = busy[LDA][1] + busy[AOI][1]
                # Bits: one packet's worth over everything sent.
                dev = abs(busy[AOI][1] / total - g) / (quantum / total)
            else:
                total = busy[LDA][0] + busy[AOI][0]
                # Time: one transmission per frame.
                dev = abs(busy[AOI][0] / total - g) / (quantum / frame)
            worst[scheme] = max(worst[scheme], dev)
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1.0 and dt < 30.0
    acceptance_report(
        "[08] SDM/TDM share convergence",
        ok,
        f"worst deviation in quanta: SDM {worst['SDM']:.3f}, TDM {worst['TDM']:.3f}",
        dt,
    )
    assert max(worst.values()) <= 1.0
    assert dt < 30.0


# -- 9 ----------------------------------------------------------------------


def test_queue_invariants_on_random_traces(acceptance_report):
    rng = random.Random(9)
    t0 = time.perf_counter()
    q = IfilQueue()
    seen, newest = set(), {}
    order = []  # reference inter-flow order
    seq = {}
    fifo = FifoQueue(max_bits=5000.0)
    fifo_ref = []
    for _ in range(100_000):
        r = rng.random()
        if r < 0.45:
            fid = f"f{rng.randrange(200)}"
            s = seq.get(fid, 0) + 1
            seq[fid] = s
            q.enqueue(Packet(fid, AOI, 1.0, 0.0, s))
            seen.add(fid)
            if fid not in newest:
                order.append(fid)
            newest[fid] = s
        elif r < 0.7:
            pkt = q.dequeue()
            if order:
                fid = order.pop(0)
                assert pkt is not None and pkt.flow_id == fid, "inter-flow FIFO order broken"
                assert pkt.seq == newest.pop(fid), "queued packet is not the newest"
            else:
                assert pkt is None
        elif r < 0.9:
            size = rng.choice([100.0, 500.0, 1500.0])
            status = fifo.enqueue(Packet("x", LDA, size, 0.0, 0))
            if sum(fifo_ref) + size <= 5000.0:
                assert status == Enq.INSERTED
                fifo_ref.append(size)
            else:
                assert status == Enq.DROPPED
        else:
            pkt = fifo.dequeue()
            if fifo_ref:
                assert pkt.size_bits == fifo_ref.pop(0)
        assert len(q) <= len(seen)
        assert q.flows() == order
        assert fifo.bits <= 5000.0
    dt = time.perf_counter() - t0
    ok = dt < 30.0
    acceptance_report("[09] queue invariants", ok, "100000 random operations, all invariants held", dt)
    assert ok


# -- 10 ---------------------------------------------------------------------


def _enqueue_cost(n_flows, ops=100_000):
    rng = random.Random(n_flows)
    names = [f"f{i}" for i in range(n_flows)]
    q = IfilQueue()
    for name in names:
        q.enqueue(Packet(name, AOI, 1.0, 0.0, 0))
    pkts = [Packet(names[rng.randrange(n_flows)], AOI, 1.0, 1.0, 1) for _ in range(ops)]
    t = time.perf_counter()
    for p in pkts:
        q.enqueue(p)
    return (time.perf_counter() - t) / ops


def test_hashed_ifil_scaling(acceptance_report):
    t0 = time.perf_counter()
    small, large = [], []
    # Interleave the two sizes so machine noise hits both alike.
    for _ in range(7):
        small.append(_enqueue_cost(10))
        large.append(_enqueue_cost(10_000))
    ratio = min(large) / min(small)
    dt = time.perf_counter() - t0
    ok = ratio <= 3.0 and dt < 60.0
    acceptance_report(
        "[10] hashed IFIL scaling",
        ok,
        f"{min(small) * 1e9:.0f} ns at 10 flows, {min(large) * 1e9:.0f} ns at 10^4 flows, ratio {ratio:.2f}",
        dt,
    )
    assert ratio <= 3.0
    assert dt < 60.0


# -- 11 ---------------------------------------------------------------------


def test_directional_tradeoff_on_b4(acceptance_report):
    net, _ = load_topology(builtin_topology_path("b4"))
    sc = Scenario(
        net,
        (),
        SchedulerSpec("SDM"),
        duration_s=200.0,
        lda_mode=GREEDY,
        greedy_window=100,
        fifo_max_packets=100,
        traffic=TrafficSpec(pair_prob=0.1),
    )
    t0 = time.perf_counter()
    curve = run_compare(sc, pairs=[("lac", "SDM"), ("max_throughput", "FIFO")], lam=0.125, seeds=range(20))
    dt = time.perf_counter() - t0
    failed = [r for r in curve.rows if r.status != "ok"]
    lac = curve.select(objective="lac", scheduler="SDM")
    mt = curve.select(objective="max_throughput", scheduler="FIFO")
    thr_lac = np.mean([r.total_lda_throughput_bps for r in lac])
    thr_mt = np.mean([r.total_lda_throughput_bps for r in mt])
    aoi_lac = np.mean([r.total_aoi_s for r in lac])
    aoi_mt = np.mean([r.total_aoi_s for r in mt])
    thr_drop = 1 - thr_lac / thr_mt
    aoi_cut = 1 - aoi_lac / aoi_mt
    ok = not failed and len(lac) == len(mt) == 20 and thr_drop <= 0.15 and aoi_cut >= 0.30 and dt < 600
    acceptance_report(
        "[11] directional trade-off on B4",
        ok,
        f"throughput {thr_drop:.1%} lower, total AoI {aoi_cut:.1%} shorter over 20 patterns",
        dt,
    )
    assert not failed, [r.reason for r in failed]
    assert thr_drop <= 0.15
    assert aoi_cut >= 0.30
    assert dt < 600
