"""
flexsim Command Line

    flexsim gen-graph --family regular --n 64 --d 16 --seed 1 --out g.txt
    flexsim check-capacity --graph g.txt --rates r.txt [--slack 0.1]
    flexsim simulate --config scenarios/mm1.toml [--csv out.csv]
    flexsim reproduce-figure --n 64,216,512 --reps 50 --seed 7 --out results/
    flexsim bounds --formula erlang-c --args c=2 r=1

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .analysis.formulas import BOUNDS, evaluate_bound
from .capacity.region import hall_oracle, is_feasible, read_rates
from .config import get_settings
from .errors import ConfigError, FlexSimError
from .experiments.metrics import StudyMetrics
from .experiments.output import emit_csv, write_gnuplot
from .experiments.scenario import load_scenario
from .experiments.study import FIGURE_SIZES, reproduce_figure, run_study
from .logging_setup import setup_logging
from .sim.model import format_record
from .topology.builders import FAMILIES, build_family
from .topology.graph import format_graph, read_graph, write_graph

logger = logging.getLogger(__name__)


def _int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}", field="--n")
    if not values:
        raise ConfigError("empty list", field="--n")
    return values


def _parse_args_kv(pairs: Sequence[str]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise ConfigError(f"expected key=value, got {pair!r}", field="--args")
        try:
            out[key] = int(raw)
        except ValueError:
            try:
                out[key] = float(raw)
            except ValueError:
                raise ConfigError(f"{key}: not a number: {raw!r}", field="--args")
    return out


def _print_record(record: Dict[str, Any]) -> None:
    sys.stdout.write(format_record(record))


# ========== SUBCOMMANDS ==========

def cmd_gen_graph(args: argparse.Namespace) -> int:
    topology = build_family(args.family, args.n, args.d, seed=args.seed, cluster_degree=args.cluster_degree)
    g = topology.graph
    if args.out:
        write_graph(g, args.out)
        logger.info(f"{args.family} graph: {g.n_queues} queues, {g.num_edges} edges -> {args.out}")
    else:
        sys.stdout.write(format_graph(g))
    return 0


def cmd_check_capacity(args: argparse.Namespace) -> int:
    g = read_graph(args.graph)
    lam = read_rates(args.rates)
    result = is_feasible(g, lam, slack=args.slack)
    record = result.to_dict()
    flow = record.pop("flow", None)
    if "subset" in record:
        record["subset"] = " ".join(str(i) for i in record["subset"])
    if args.oracle:
        record["hall_oracle"] = "Feasible" if hall_oracle(g, lam) else "Infeasible"
    _print_record(record)
    if flow and args.show_flow:
        _print_record({f"flow[{edge}]": f for edge, f in flow.items()})
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    scn = load_scenario(args.config)
    metrics = StudyMetrics() if args.metrics_file else None
    study = run_study(scn, workers=args.workers, trace_dir=args.trace_dir, metrics=metrics)
    for k, res in enumerate(study.replicates):
        if k:
            sys.stdout.write("\n")
        _print_record(res.to_record())
    if len(study.replicates) > 1:
        sys.stdout.write("\n")
        _print_record(study.summary())
    if args.csv:
        emit_csv(study, args.csv)
    if metrics is not None:
        metrics.write(args.metrics_file)
    if study.any_unstable:
        logger.warning(f"{scn.name}: at least one replicate crossed the instability threshold")
    return 0


def cmd_reproduce_figure(args: argparse.Namespace) -> int:
    n_list = _int_list(args.n)
    sizes = [s.strip() for s in args.sizes.split(",") if s.strip()]
    for s in sizes:
        if s not in FIGURE_SIZES:
            raise ConfigError(f"unknown size distribution {s!r}", field="--sizes")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    metrics = StudyMetrics() if args.metrics_file else None
    studies = reproduce_figure(
        n_list,
        rho=args.rho,
        replications=args.reps,
        seed=args.seed,
        sizes=sizes,
        slots=args.slots,
        burn_in=args.burn_in,
        workers=args.workers,
        metrics=metrics,
    )
    emit_csv(studies, out / "figure.csv")
    write_gnuplot(studies, out / "figure.dat")
    if metrics is not None:
        metrics.write(args.metrics_file)
    for s in studies:
        _print_record({"n": s.n, "d": s.d, "size_dist": s.size_dist, "p25": s.p25, "median": s.median, "p75": s.p75})
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    report = evaluate_bound(args.formula, **_parse_args_kv(args.args))
    _print_record(report.to_record())
    return 0


# ========== PARSER ==========

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flexsim", description="Flexible queueing architectures toolkit")
    ap.add_argument("--version", action="version", version=f"flexsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="build a bipartite queue/server graph")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=float, default=None, help="degree, cluster size or average degree")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cluster-degree", type=int, default=None, help="expanded-modular cluster-graph degree")
    p.add_argument("--out", default=None, help="graph file (stdout when omitted)")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("check-capacity", help="decide whether a rate vector is in the capacity region")
    p.add_argument("--graph", required=True)
    p.add_argument("--rates", required=True)
    p.add_argument("--slack", type=float, default=0.0)
    p.add_argument("--oracle", action="store_true", help="also run the exhaustive Hall check")
    p.add_argument("--show-flow", action="store_true")
    p.set_defaults(func=cmd_check_capacity)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("--config", required=True)
    p.add_argument("--csv", default=None)
    p.add_argument("--metrics-file", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--trace-dir", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce-figure", help="delay vs n on random regular graphs")
    p.add_argument("--n", default="64,216,512")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--slots", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--sizes", default=",".join(FIGURE_SIZES))
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--metrics-file", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reproduce_figure)

    p = sub.add_parser("bounds", help="evaluate a closed-form delay formula")
    p.add_argument("--formula", required=True, choices=sorted(BOUNDS))
    p.add_argument("--args", nargs="*", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=cmd_bounds)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
    except ConfigError as e:
        sys.stderr.write(f"flexsim: configuration error: {e}\n")
        return e.exit_code
    setup_logging(settings.log_level, settings.log_format)

    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"configuration error: {e}")
        return e.exit_code
    except FlexSimError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(str(e))
        return 3


if __name__ == "__main__":
    sys.exit(main())
