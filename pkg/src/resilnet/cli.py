"""Command-line surface: run, batch, compare, validate, oracle.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from . import metrics
from .errors import ResilnetError
from .scenario import builtin_names, load_scenario
from .sim import STRATEGIES, RunConfig, run, run_batch

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
log = logging.getLogger("resilnet")

SUMMARY_KEYS = ("ri_mean", "plr_attack_pct", "urllc_p99_attack_ms", "peak_penalty_pct",
                "penalty_window_s", "mttd_s", "mttr_s", "failure_time_s")


def _add_common(p: argparse.ArgumentParser, runs: bool = False) -> None:
    p.add_argument("--scenario", default="coordinated",
                   help="built-in scenario name or path to a .toml/.json file")
    p.add_argument("--seed", type=int, default=None, help="master seed (u64); default from the scenario")
    p.add_argument("--duration", type=float, default=None, help="override the run length in seconds")
    p.add_argument("--out", default=None, help="directory for report files")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if runs:
        p.add_argument("--runs", type=int, default=None, help="runs per strategy; default from the scenario")
        p.add_argument("--workers", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resilnet", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="one run of one strategy")
    _add_common(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="proposed")

    p = sub.add_parser("batch", help="independent runs of one strategy")
    _add_common(p, runs=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="proposed")

    p = sub.add_parser("compare", help="strategies side by side on paired seeds")
    _add_common(p, runs=True)
    p.add_argument("--strategy", dest="strategies", action="append", choices=STRATEGIES,
                   help="repeat to choose strategies; default all three, proposed first")

    p = sub.add_parser("validate", help="check a scenario file and print its outline")
    p.add_argument("--scenario", default=None, help="omit to list the built-in scenarios")

    p = sub.add_parser("oracle", help="recompute the reference values used by the tests")
    p.add_argument("--trials", type=int, default=1_000_000, help="Monte Carlo trials")
    return ap


def _print_table(reports: Sequence[metrics.KpiReport]) -> None:
    width = max(len(k) for k in SUMMARY_KEYS)
    print(" " * width + "".join(f"{r.strategy:>22}" for r in reports))
    for k in SUMMARY_KEYS:
        cells = []
        for r in reports:
            m = r.kpis.get(k, {}).get("mean")
            cells.append(f"{'-' if m is None else f'{m:.4g}':>22}")
        print(f"{k:<{width}}" + "".join(cells))


def _seed(args, scenario) -> int:
    return int(args.seed if args.seed is not None else scenario.run["seed"])


def _emit(args, reports, series) -> None:
    if args.out is None:
        return
    for path in metrics.emit_report(reports, args.format, args.out, series):
        log.info("wrote %s", path)


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    res = run(RunConfig(sc, args.strategy, _seed(args, sc), duration=args.duration))
    rep = metrics.build_report([res])
    _print_table([rep])
    _emit(args, [rep], {res.strategy: [res]})
    return EXIT_OK


def _batch(args, sc, strategy):
    cfg = RunConfig(sc, strategy, _seed(args, sc), duration=args.duration)
    return run_batch(cfg, args.runs, args.workers)


def cmd_batch(args) -> int:
    sc = load_scenario(args.scenario)
    results = _batch(args, sc, args.strategy)
    rep = metrics.build_report(results)
    _print_table([rep])
    _emit(args, [rep], {args.strategy: results})
    return EXIT_OK


def cmd_compare(args) -> int:
    sc = load_scenario(args.scenario)
    strategies = list(dict.fromkeys(args.strategies or STRATEGIES))
    batches = {s: _batch(args, sc, s) for s in strategies}
    reports = [metrics.build_report(batches[s]) for s in strategies]
    _print_table(reports)
    _emit(args, reports, batches)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.scenario is None:
        for name in builtin_names():
            print(name)
        return EXIT_OK
    sc = load_scenario(args.scenario)
    census = sc.topology().census()
    print(f"scenario {sc.name}: ok")
    print("  nodes " + ", ".join(f"{k}={v}" for k, v in census.items()))
    print(f"  flows {len(sc.flows)}, streams {len(sc.stream_ids)}, attacks {len(sc.attacks)}")
    print(f"  run {json.dumps(sc.run, sort_keys=True)}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracles import reference_values

    for name, value in reference_values(args.trials).items():
        print(f"{name:<52} {value:.10g}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "batch": cmd_batch, "compare": cmd_compare,
            "validate": cmd_validate, "oracle": cmd_oracle}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except ResilnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
