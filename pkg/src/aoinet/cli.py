"""Command-line entry point: solve, simulate, sweep, compare, analyze."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import closed_form as cf
from .fate import LAC, MAX_THROUGHPUT, SolverConfig, SolverError, solve
from .harness import (
    DEFAULT_LAMBDA,
    ScenarioError,
    SweepSpec,
    emit_report,
    load_scenario,
    objective_name,
    run_compare,
    run_sweep,
    table_csv,
)
from .model import ModelError
from .sim.engine import SimulationError, run, scheduler_name
from .sim.measure import MeasurementError

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text}") from None


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aoinet", description="Freshness-aware rate allocation and AoI-aware queueing experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scheduler_list=False):
        sp.add_argument("--scenario", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--format", choices=("csv", "json"), default="json")
        sp.add_argument("--objective", type=_names, metavar="NAME")
        sp.add_argument("--lambda", dest="lam", type=_floats, metavar="LIST")
        sp.add_argument("--scheduler", type=_names, metavar="NAME")
        sp.add_argument("--seed", type=_ints, metavar="N")
        sp.add_argument("--duration", type=float, metavar="S")
        sp.add_argument("--warmup", type=float, metavar="S")

    common(sub.add_parser("solve", help="compute a rate allocation"))
    common(sub.add_parser("simulate", help="simulate one scenario"))
    sw = sub.add_parser("sweep", help="lambda sweep over objectives and schedulers")
    common(sw)
    sw.add_argument("--pair-prob", type=float)
    sw.add_argument("--workers", type=int, default=1)
    cp = sub.add_parser("compare", help="compare policies on identical traffic")
    common(cp)
    cp.add_argument("--pair-prob", type=float)
    cp.add_argument("--workers", type=int, default=1)
    cp.add_argument("--pairs", action="store_true", help="zip objectives with schedulers instead of a cross product")

    an = sub.add_parser("analyze", help="closed-form single-link table over a gamma grid")
    an.add_argument("--C", type=float, default=1.0)
    an.add_argument("--T-i", dest="T_i", type=float, default=1.0)
    an.add_argument("--T-f", dest="T_f", type=float, default=10.0)
    an.add_argument("--d-t", dest="d_t", type=float, default=0.5)
    an.add_argument("--d-p", dest="d_p", type=float, default=0.0)
    an.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    an.add_argument("--steps", type=int, default=20)
    an.add_argument("--scheduler", default="SDM", help="scheme whose objective is reported")
    an.add_argument("--out", metavar="PATH")
    an.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def _one(values, what):
    if values is None:
        return None
    if len(values) != 1:
        raise UsageError(f"{what} takes a single value here")
    return values[0]


def _load(args):
    sc = load_scenario(args.scenario)
    if args.duration is not None or args.warmup is not None:
        sc = replace(
            sc,
            duration_s=sc.duration_s if args.duration is None else args.duration,
            warmup_s=sc.warmup_s if args.warmup is None else args.warmup,
        )
    return sc


def _write(text: str, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    sc = _load(args)
    obj = _one(args.objective, "--objective")
    obj = objective_name(obj) if obj else (sc.objective or LAC)
    lam = _one(args.lam, "--lambda")
    lam = lam if lam is not None else (sc.lam if sc.lam is not None else DEFAULT_LAMBDA)
    alloc = solve(obj, sc.network, sc.flows, SolverConfig(lam=lam if obj == LAC else 0.0), s_lda=sc.s_lda_bits)
    if args.format == "json":
        _write(json.dumps(alloc.to_dict(), indent=2) + "\n", args.out)
    else:
        _write(table_csv(({"flow": k, "value": v} for k, v in alloc.values.items()), ("flow", "value")), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = _load(args)
    changes = {}
    obj = _one(args.objective, "--objective")
    lam = _one(args.lam, "--lambda")
    if lam is not None and obj is None and sc.objective is None and sc.allocation is None:
        raise ScenarioError("objective required when lambda is given")
    if obj:
        changes.update(objective=objective_name(obj), allocation=None)
    if lam is not None:
        changes["lam"] = lam
    sched = _one(args.scheduler, "--scheduler")
    if sched:
        changes["scheduler"] = replace(sc.scheduler, name=scheduler_name(sched))
    seed = _one(args.seed, "--seed")
    if seed is not None:
        changes["seed"] = seed
    sc = replace(sc, **changes)
    if sc.objective == LAC and sc.lam is None:
        sc = replace(sc, lam=DEFAULT_LAMBDA)
    rep = run(sc)
    if args.format == "json":
        _write(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    else:
        cols = ("flow", "class", "aoi_s", "u_avg", "p_avg", "q_avg", "throughput_bps")
        _write(table_csv(rep.csv_rows(), cols), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _load(args)
    spec = SweepSpec(
        sc,
        tuple(args.lam or [DEFAULT_LAMBDA]),
        tuple(args.scheduler or [sc.scheduler.name]),
        tuple(args.objective or [sc.objective or LAC]),
        tuple(args.seed or [sc.seed]),
        pair_prob=args.pair_prob,
        workers=args.workers,
    )
    _write(emit_report(run_sweep(spec), args.format, None), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    sc = _load(args)
    lam = _one(args.lam, "--lambda")
    objectives = args.objective or [LAC, MAX_THROUGHPUT]
    schedulers = args.scheduler or ["SDM", "FIFO"]
    pairs = None
    if args.pairs or (args.objective is None and args.scheduler is None):
        if len(objectives) != len(schedulers):
            raise UsageError("--pairs needs as many objectives as schedulers")
        pairs = list(zip(objectives, schedulers))
    curve = run_compare(
        sc,
        schedulers,
        objectives,
        lam=DEFAULT_LAMBDA if lam is None else lam,
        seeds=args.seed or [sc.seed],
        pairs=pairs,
        pair_prob=args.pair_prob,
        workers=args.workers,
    )
    _write(emit_report(curve, args.format, None), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    scheme = args.scheduler.lower()
    if scheme not in ("sdm", "tdm"):
        raise UsageError("--scheduler must be SDM or TDM for analyze")
    p = cf.SingleLinkParams(C=args.C, T_i=args.T_i, T_f=args.T_f, d_t=args.d_t, d_p=args.d_p, lam=args.lam)
    gammas = [k / args.steps for k in range(1, args.steps + 1)]
    rows = cf.gamma_table(p, gammas, scheme)
    cols = ("gamma", "tdm_throughput", "tdm_aoi", "sdm_throughput", "sdm_aoi", "objective")
    if args.format == "json":
        _write(json.dumps({"params": vars(p), "rows": rows}, indent=2) + "\n", args.out)
    else:
        _write(table_csv(rows, cols), args.out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ModelError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, SimulationError, MeasurementError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
