"""Command-line interface: check, oracle, and dump subcommands.

Reports are plain key/value lines; every statistics line parses as
``key: integer``. Exit codes: 0 safe, 1 unsafe and confirmed on a finite
instance, 2 unknown / spurious / resource limit, 3 usage or input errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from .engine import EngineConfig, backward_reach
from .logic import ArrayReachError, format_formula
from .oracle import FiniteInstance, TooLarge
from .system import (
    ParseError,
    SafetyProblem,
    Theory,
    ValidationError,
    parse_system,
    print_system,
)

EXIT_SAFE = 0
EXIT_UNSAFE = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3


def _load(path: str) -> SafetyProblem:
    with open(path) as fh:
        return parse_system(fh.read())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arrayreach")
    sub = parser.add_subparsers(dest="mode", required=True)

    check = sub.add_parser("check", help="run backward reachability on a system file")
    check.add_argument("file")
    check.add_argument(
        "--abstraction",
        choices=["runtime", "transform", "off"],
        default="runtime",
    )
    check.add_argument("--accelerate", choices=["on", "off", "auto"], default="auto")
    check.add_argument("--inst-set", choices=["default", "all-vars"], default="default")
    check.add_argument("--max-iters", type=int, default=200)
    check.add_argument("--max-nodes", type=int, default=20000)
    check.add_argument("--oracle-n", type=int, default=6)
    check.add_argument("--trace", action="store_true", help="print the error trace")
    check.add_argument("--dump-frontier", metavar="PATH", default=None)
    check.add_argument("--dump-queries", metavar="DIR", default=None)

    oracle_p = sub.add_parser("oracle", help="exhaustive forward search on a finite instance")
    oracle_p.add_argument("file")
    oracle_p.add_argument("--n", type=int, required=True)
    oracle_p.add_argument("--int-lo", type=int, default=-3)
    oracle_p.add_argument("--int-hi", type=int, default=3)

    dump = sub.add_parser("dump", help="parse, validate, and reprint a system file")
    dump.add_argument("file")
    return parser


def _run_check(args) -> int:
    problem = _load(args.file)
    accelerate = {
        "on": True,
        "off": False,
        "auto": problem.theory == Theory.DIFFARITH,
    }[args.accelerate]
    cfg = EngineConfig(
        max_iters=args.max_iters,
        max_nodes=args.max_nodes,
        abstraction=args.abstraction,
        accelerate=accelerate,
        inst_set=args.inst_set,
        max_oracle_n=args.oracle_n,
        dump_frontier=args.dump_frontier,
        dump_queries=args.dump_queries,
    )
    res = backward_reach(problem, cfg)

    print(f"system: {problem.name}")
    print(f"theory: {problem.theory.value}")
    print("mode: check")
    print(f"abstraction: {args.abstraction}")
    print(f"accelerate: {'on' if accelerate else 'off'}")
    print(f"inst-set: {args.inst_set}")
    print(f"max-iters: {args.max_iters}")
    print(f"max-nodes: {args.max_nodes}")
    print(f"oracle-n: {args.oracle_n}")
    if res.accelerated_names:
        print(f"accelerated: {' '.join(res.accelerated_names)}")
    print(f"verdict: {res.verdict.upper().replace('-', '_')}")
    if res.reason:
        print(f"reason: {res.reason}")
    print(f"iterations: {res.iterations}")
    print(f"nodes: {res.stats.get('nodes', 0)}")
    print(f"deleted: {res.stats.get('deleted', 0)}")
    print(f"pruned: {res.stats.get('pruned', 0)}")
    print(f"solver_calls: {res.stats.get('solver_calls', 0)}")

    if res.verdict == "unsafe" and res.trace is not None:
        print("trace:")
        for i, step in enumerate(res.trace.steps, start=1):
            marks = []
            if step.abstracted:
                marks.append("abstracted")
            if step.accelerated:
                marks.append("accelerated")
            suffix = f" [{', '.join(marks)}]" if marks else ""
            print(f"  {i}. {step.transition}{suffix}")
        if args.trace:
            print(f"  unsafe: {format_formula(res.trace.unsafe_formula)}")
            print(f"  initial: {format_formula(res.trace.initial_formula)}")
        if res.concretization is not None:
            c = res.concretization
            if c.status == "confirmed":
                print(f"concretization: confirmed at N={c.n}")
                return EXIT_UNSAFE
            print(f"concretization: {c.status}")
            return EXIT_UNKNOWN
        return EXIT_UNSAFE
    if res.verdict == "safe":
        return EXIT_SAFE
    return EXIT_UNKNOWN


def _run_oracle(args) -> int:
    problem = _load(args.file)
    inst = FiniteInstance(problem, args.n, args.int_lo, args.int_hi)
    res = inst.forward_reach()
    print(f"system: {problem.name}")
    print("mode: oracle")
    print(f"n: {args.n}")
    print(f"int-lo: {args.int_lo}")
    print(f"int-hi: {args.int_hi}")
    print(f"verdict: {'SAFE_UP_TO' if res.safe else 'UNSAFE_AT'}")
    print(f"explored: {res.explored}")
    if not res.safe and res.run is not None:
        print("run:")
        for tname, state in res.run:
            step = tname if tname is not None else "init"
            vals = " ".join(f"{k}={v}" for k, v in sorted(state.items()))
            print(f"  {step}: {vals}")
        return EXIT_UNSAFE
    return EXIT_SAFE


def _run_dump(args) -> int:
    problem = _load(args.file)
    sys.stdout.write(print_system(problem))
    return EXIT_SAFE


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        if args.mode == "check":
            return _run_check(args)
        if args.mode == "oracle":
            return _run_oracle(args)
        return _run_dump(args)
    except (ParseError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNKNOWN
    except ArrayReachError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
