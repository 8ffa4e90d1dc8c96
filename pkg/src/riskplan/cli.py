"""Command-line entry point.

Exit codes: 0 success, 1 planner failure or timeout (or a failed oracle),
2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .runner import FIELDS, export_field, run, write_grid_csv
from .scenario import ConfigError, bundled_scenarios, load_scenario
from .trace import read_trace
from .verify import run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    p = _Parser(prog="riskplan", description="Risk-aware online motion planning episodes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one episode and write its trace")
    r.add_argument("--scenario", required=True, help="bundled scenario name or YAML path")
    r.add_argument("--seed", type=_u64)
    r.add_argument("--deterministic", action="store_true", help="iteration budgets instead of wall-clock")
    r.add_argument("--out", help="output directory (default: scenario output or runs/<id>)")

    e = sub.add_parser("export-field", help="write a field on a grid as CSV")
    e.add_argument("--scenario", required=True)
    e.add_argument("--what", required=True, help=" | ".join(FIELDS))
    e.add_argument("--resolution", type=float, default=0.25)
    e.add_argument("--trace", help="trace.jsonl whose final dataset conditions the posterior")
    e.add_argument("--out", help="CSV path or directory (default: <what>.csv)")

    v = sub.add_parser("verify", help="check numerics against independent oracles")
    v.add_argument("--scenario", help="take kernel, world and constraint from this scenario")
    v.add_argument("--samples", type=int, default=10**7, help="Monte-Carlo sample count")

    sub.add_parser("list-scenarios", help="list bundled scenarios")
    return p


def _cmd_run(args):
    sc = load_scenario(args.scenario)
    out = args.out or sc.output or str(Path("runs") / sc.id)
    trace = run(sc, seed=args.seed, deterministic=True if args.deterministic else None, out_dir=out)
    print(f"{sc.id}: {trace.status} after {len(trace.steps) - 1} steps, "
          f"{trace.trigger_count} triggers, path length {trace.path_length:.2f}; trace in {out}")
    return EXIT_OK if trace.reached_goal else EXIT_FAIL


def _cmd_export(args):
    if args.what not in FIELDS:
        print(f"riskplan: error: unknown field {args.what!r}; expected one of {', '.join(FIELDS)}", file=sys.stderr)
        return EXIT_CONFIG
    if args.resolution <= 0:
        print("riskplan: error: --resolution must be positive", file=sys.stderr)
        return EXIT_CONFIG
    sc = load_scenario(args.scenario)
    dataset = None
    if args.trace:
        tr = read_trace(args.trace)
        dataset = (tr.dataset_points, tr.dataset_values)
    xs, ys, V = export_field(sc, args.what, args.resolution, dataset)
    out = Path(args.out or f"{args.what}.csv")
    if out.is_dir() or not out.suffix:
        out = out / f"{sc.id}-{args.what}.csv"
    write_grid_csv(out, xs, ys, V)
    print(out)
    return EXIT_OK


def _cmd_verify(args):
    sc = load_scenario(args.scenario) if args.scenario else None
    results = run_suite(sc, mc_samples=args.samples)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} oracles passed")
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_list(args):
    for name, path in bundled_scenarios().items():
        sc = load_scenario(name)
        print(f"{name:<10s} {sc.planner:<7s} {sc.description}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    cmd = {"run": _cmd_run, "export-field": _cmd_export, "verify": _cmd_verify, "list-scenarios": _cmd_list}[args.verb]
    try:
        return cmd(args)
    except ConfigError as e:
        print(f"riskplan: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
