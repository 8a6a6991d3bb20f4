"""Command line: ``locsaa run | sample-size | verify | bounds``."""
from __future__ import annotations

import argparse
import sys

from . import concentration as conc
from . import harness
from .problem_core import ProblemError


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _print_table(rows, columns=None):
    sys.stdout.write(harness.write_csv(None, rows, columns))


def cmd_run(args) -> int:
    try:
        cfg = harness.load_config(args.config)
    except harness.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return harness.EXIT_CONFIG
    res = harness.run_experiment(cfg, args.output, args.workers)
    _print_table(res["summary"])
    print(f"wrote {res['output']} ({len(res['rows'])} units, {res['wall_time_s']:.1f} s, "
          f"{res['workers']} workers)", file=sys.stderr)
    return harness.EXIT_OK if res["all_pass"] else harness.EXIT_ACCEPTANCE


def cmd_sample_size(args) -> int:
    try:
        rows = harness.sample_size_table(_floats(args.q), _floats(args.rho), _floats(args.eps),
                                         args.instance)
    except (ProblemError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    _print_table(rows)
    return harness.EXIT_OK


def cmd_verify(args) -> int:
    try:
        ok, problems = harness.verify_run(args.run_dir)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    for p in problems:
        print(p, file=sys.stderr)
    print("verified" if ok else "mismatch")
    return harness.EXIT_OK if ok else harness.EXIT_ACCEPTANCE


def cmd_bounds(args) -> int:
    if args.family not in conc.FAMILIES:
        print(f"error: unknown family {args.family!r}; expected one of {', '.join(conc.FAMILIES)}",
              file=sys.stderr)
        return harness.EXIT_CONFIG
    try:
        gen = conc.generator_from_name(args.generator)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    rows = conc.family_rows(args.family, gen, args.N, args.replications, args.seed,
                            _floats(args.t))
    _print_table(rows)
    return harness.EXIT_OK if all(r["passed"] for r in rows) else harness.EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locsaa",
                                description="Localized SAA deviation experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="config path or the name of a shipped config")
    r.add_argument("--workers", type=int, default=None, help="override the worker count")
    r.add_argument("--output", default=None, help="override the output directory")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sample-size", help="sufficient sample sizes on a grid")
    s.add_argument("--q", required=True, help="comma-separated moment orders")
    s.add_argument("--rho", required=True, help="comma-separated failure probabilities")
    s.add_argument("--eps", required=True, help="comma-separated tolerances")
    s.add_argument("--instance", required=True, help="descriptor path or shipped instance name")
    s.set_defaults(fn=cmd_sample_size)

    v = sub.add_parser("verify", help="recompute summary.csv from trials.csv")
    v.add_argument("run_dir")
    v.set_defaults(fn=cmd_verify)

    b = sub.add_parser("bounds", help="Monte Carlo check of one tail bound family")
    b.add_argument("--family", required=True, help=", ".join(conc.FAMILIES))
    b.add_argument("--generator", required=True, help="e.g. pareto-4.5 or student_t-8")
    b.add_argument("--N", type=int, default=50)
    b.add_argument("--replications", type=int, default=2000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--t", default="1,2,3", help="comma-separated t grid")
    b.set_defaults(fn=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
