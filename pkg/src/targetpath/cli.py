"""Command-line driver: analyze targets, simulate plans, run the oracle.

Exit codes: 0 success, 1 incomplete analysis or failed simulation, 2 bad input.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path as FsPath
from typing import Optional

from .ir import AppModel, ParseError, parse_app
from .pipeline import DEFAULT_TIMEOUT, Analyzer
from .callgraph import DEFAULT_MAX_PATHS
from .plan import PlanFormatError, canonical_json, deserialize, serialize
from .sim import MAX_ORACLE_DEPTH, execute_plan, exhaustive_explore, sorted_methods

EXIT_OK, EXIT_INCOMPLETE, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def load_app(path: str) -> AppModel:
    try:
        text = FsPath(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    try:
        return parse_app(text)
    except ParseError as e:
        raise InputError(f"{path}: {e}") from e


def select_targets(model: AppModel, explicit: Optional[list[str]], all_methods: bool,
                   sample: Optional[int], seed: Optional[int]) -> list[str]:
    every = sorted(str(m.ref) for c in model.classes.values() for m in c.methods.values())
    if explicit:
        return list(explicit)
    if all_methods:
        return every
    rng = random.Random(seed)
    return sorted(rng.sample(every, min(sample, len(every))))


def _write(data: bytes, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(data.decode("utf-8") + "\n")
    else:
        FsPath(out).write_bytes(data + b"\n")


def sidecar(out: str, suffix: str) -> str:
    p = FsPath(out)
    return str(p.with_name(p.stem + suffix))


def cmd_analyze(args) -> int:
    model = load_app(args.app)
    targets = select_targets(model, args.target, args.all_methods, args.sample, args.seed)
    analyzer = Analyzer(model)
    reports = analyzer.analyze_all(targets, args.max_paths, args.timeout, args.jobs)
    plans = [p for r in reports for p in r.plans]
    statuses = [r.status for r in reports]
    diagnostics = {
        "app": model.package_name,
        "icc": analyzer.icc.to_json(),
        "targets": [r.diagnostics for r in reports],
        "summary": {"targets": len(reports), "plans": len(plans),
                    "status": {s: statuses.count(s) for s in sorted(set(statuses))}},
    }
    timings = {"targets": [{"target": r.target, "status": r.status,
                            "seconds": round(r.seconds, 6)} for r in reports]}
    _write(serialize(plans), args.out)
    base = args.out if args.out not in (None, "-") else args.diagnostics
    if base:
        diag_path = args.diagnostics or sidecar(base, ".diagnostics.json")
        FsPath(diag_path).write_bytes(canonical_json(diagnostics) + b"\n")
        FsPath(sidecar(base, ".timings.json")).write_bytes(canonical_json(timings) + b"\n")
    return EXIT_OK if reports and all(r.plans for r in reports) else EXIT_INCOMPLETE


def cmd_simulate(args) -> int:
    model = load_app(args.app)
    try:
        plans = deserialize(FsPath(args.plan).read_bytes())
    except OSError as e:
        raise InputError(f"cannot read {args.plan}: {e.strerror}") from e
    except PlanFormatError as e:
        raise InputError(f"{args.plan}: {e}") from e
    verdicts = [execute_plan(model, p) for p in plans]
    _write(canonical_json({"verdicts": [v.to_json() for v in verdicts]}), args.out)
    ok = all(v.verdict == "target_reached" for p, v in zip(plans, verdicts) if p.resolved)
    return EXIT_OK if ok else EXIT_INCOMPLETE


def cmd_oracle(args) -> int:
    model = load_app(args.app)
    reachable = exhaustive_explore(model, args.depth)
    _write(canonical_json({"reachable": sorted_methods(reachable)}), args.out)
    return EXIT_OK


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _depth(text: str) -> int:
    v = int(text)
    if not 0 <= v <= MAX_ORACLE_DEPTH:
        raise argparse.ArgumentTypeError(f"must be within 0..{MAX_ORACLE_DEPTH}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="targetpath",
                                     description="Plan event sequences that reach target methods.")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="synthesize plans for target methods")
    a.add_argument("--app", required=True)
    sel = a.add_mutually_exclusive_group(required=True)
    sel.add_argument("--target", nargs="+", metavar="SIG")
    sel.add_argument("--all-methods", action="store_true")
    sel.add_argument("--sample", type=_positive_int, metavar="N")
    a.add_argument("--seed", type=int)
    a.add_argument("--max-paths", type=_positive_int, default=DEFAULT_MAX_PATHS)
    a.add_argument("--timeout", type=_positive_float, default=DEFAULT_TIMEOUT)
    a.add_argument("--jobs", type=_positive_int, default=1)
    a.add_argument("--out", help="plan file (default: stdout)")
    a.add_argument("--diagnostics", help="diagnostics file (default: next to --out)")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="execute plans in the simulator")
    s.add_argument("--app", required=True)
    s.add_argument("--plan", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="methods reachable within a bounded event depth")
    o.add_argument("--app", required=True)
    o.add_argument("--depth", type=_depth, required=True)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    if args.command == "analyze" and args.sample is not None and args.seed is None:
        print("error: --sample requires --seed", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
