"""Command-line driver.

Results go to stdout (JSON with --json), progress chatter to stderr.
Exit codes: 0 success, 1 domain error, 2 usage error (argparse), 3 size
limit exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import core, enumeration, heuristics, optimizer, probability, session as sessions, zones
from .errors import PoolTestError, UnsupportedSizeError


def _parse_priors(text: str, exact: bool) -> list:
    priors = [probability.parse_prior(part, exact=exact) for part in text.split(",")]
    if exact:
        priors = [Fraction(p) if not isinstance(p, Fraction) else p for p in priors]
    return priors


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def cmd_enumerate(args) -> int:
    if args.count_only:
        total = sum(
            1
            for _ in enumeration.enumerate_procedures(
                args.n, prune_maximal=args.prune, prune_interchange=args.prune
            )
        )
        _emit(args, {"n": args.n, "procedures": total}, str(total))
        return 0
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        total = 0
        for proc in enumeration.enumerate_procedures(
            args.n, prune_maximal=args.prune, prune_interchange=args.prune
        ):
            out.write(core.encode(proc) + "\n")
            total += 1
    finally:
        if args.out:
            out.close()
    _progress(f"wrote {total} procedures")
    return 0


def cmd_count(args) -> int:
    if args.naive:
        result = enumeration.count_naive(args.n)
    elif args.catalan:
        result = enumeration.catalan_upper_bound(args.n)
    else:
        result = enumeration.count_procedures(args.n)
    _emit(
        args,
        {"n": result.n, "count": result.value, "method": result.method},
        str(result.value),
    )
    return 0


def cmd_optimal(args) -> int:
    priors = _parse_priors(args.priors, args.exact)
    mode = "exact" if args.exact else "auto"
    tree = optimizer.find_optimal(priors, mode=mode)
    value = probability.expected_length(tree, priors, mode=mode)
    encoded = core.encode(tree)
    if args.tree_out:
        Path(args.tree_out).write_text(encoded + "\n")
    payload = {
        "priors": [str(p) for p in priors],
        "procedure": encoded,
        "expected_length": float(value),
    }
    if args.exact:
        payload["expected_length_exact"] = str(value)
    _emit(args, payload, f"expected length {float(value):.6g}\n{encoded}")
    return 0


def cmd_greedy(args) -> int:
    priors = _parse_priors(args.priors, exact=False)
    tree = heuristics.greedy_procedure(priors)
    value = probability.expected_length(tree, priors)
    encoded = core.encode(tree)
    payload = {
        "priors": [str(p) for p in priors],
        "procedure": encoded,
        "expected_length": float(value),
    }
    _emit(args, payload, f"expected length {float(value):.6g}\n{encoded}")
    return 0


def cmd_zones(args) -> int:
    def progress(p: float) -> None:
        _progress(f"zone map {args.n}: {100 * p:.0f}%")

    zonemap = zones.compute_metaprocedure(args.n, args.res, mode=args.mode, progress=progress)
    out = args.out or f"zonemap_n{args.n}_r{zonemap.resolution}_{zonemap.mode}.json"
    zones.save_zonemap(zonemap, out)
    payload = {**zonemap.metadata(), "file": str(out)}
    _emit(args, payload, f"{zonemap.zone_count} zones -> {out}")
    return 0


def cmd_slice(args) -> int:
    zonemap = zones.load_zonemap(args.zonemap)
    result = zones.slice_zonemap(zonemap, args.plane, args.res)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in result.ids:
                writer.writerow(int(v) for v in row)
        _progress(f"wrote {args.res}x{args.res} slice to {args.out}")
    payload = {
        "plane": result.plane,
        "resolution": result.resolution,
        "distinct_ids": list(result.distinct_ids()),
        "legend": {str(k): v for k, v in sorted(result.legend.items())},
    }
    if args.json:
        payload["ids"] = result.ids.tolist()
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"{len(result.distinct_ids())} zones intersect {args.plane}")
    return 0


def cmd_simulate(args) -> int:
    if args.uniform_priors:
        report = sessions.simulate(
            None,
            args.strategy,
            args.trials,
            args.seed,
            n=args.n,
            prior_distribution="uniform",
        )
    else:
        if not args.priors:
            raise PoolTestError("pass --priors or --uniform-priors with --n")
        priors = _parse_priors(args.priors, exact=False)
        report = sessions.simulate(priors, args.strategy, args.trials, args.seed)
    _emit(
        args,
        report.to_dict(),
        f"mean tests {report.mean_tests:.4f} over {report.trials} trials",
    )
    return 0


def cmd_session(args) -> int:
    priors = _parse_priors(args.priors, exact=False)
    state = sessions.start_session(priors, args.strategy)
    print(f"session over {state.n} samples, strategy {state.strategy.descriptor()}")
    while state.status == "running":
        pool = sessions.next_pool(state)
        remaining = sessions.expected_remaining(state)
        print(f"test pool {pool}  (expected remaining {remaining:.3f})")
        while True:
            answer = input("result [+/-]: ").strip()
            if answer in ("+", "positive"):
                state = sessions.record_result(state, "positive")
                break
            if answer in ("-", "negative"):
                state = sessions.record_result(state, "negative")
                break
            print("enter + or -", file=sys.stderr)
    infected = state.outcome.infected
    print(f"complete after {state.tests_used} tests: outcome {state.outcome}")
    print(f"infected samples: {list(infected) if infected else 'none'}")
    return 0


def cmd_serve(args) -> int:
    from . import service

    service.serve(addr=args.addr, data_dir=args.data)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pooltest",
        description="Optimal adaptive pool-testing strategies from per-sample priors",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="generate all procedures for small n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--prune", action="store_true", help="drop redundant representatives")
    p.add_argument("--out", help="write one encoded procedure per line")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("count", help="exact procedure counts")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--naive", action="store_true", help="count naive-equivalent procedures")
    p.add_argument("--catalan", action="store_true", help="crude Catalan upper bound")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("optimal", help="optimal procedure at a prior point")
    p.add_argument("--priors", required=True, help="comma-separated, decimals or fractions")
    p.add_argument("--exact", action="store_true", help="rational arithmetic end-to-end")
    p.add_argument("--tree-out", help="write the encoded tree to a file")
    p.set_defaults(func=cmd_optimal)

    p = sub.add_parser("greedy", help="information-greedy procedure at a prior point")
    p.add_argument("--priors", required=True)
    p.set_defaults(func=cmd_greedy)

    p = sub.add_parser("zones", help="compute and save a zone map")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--res", type=int, default=None)
    p.add_argument("--mode", choices=["float", "exact"], default="float")
    p.add_argument("--out")
    p.set_defaults(func=cmd_zones)

    p = sub.add_parser("slice", help="2D slice of an n=3 zone map")
    p.add_argument("--zonemap", required=True)
    p.add_argument("--plane", required=True, help="e.g. z=0.17 or diag=0.3")
    p.add_argument("--res", type=int, default=128)
    p.add_argument("--out", help="CSV of zone ids")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("simulate", help="Monte Carlo over simulated sessions")
    p.add_argument("--priors")
    p.add_argument("--uniform-priors", action="store_true")
    p.add_argument("--n", type=int)
    p.add_argument("--strategy", default="optimal")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("session", help="interactive guided testing session")
    p.add_argument("--priors", required=True)
    p.add_argument("--strategy", default="optimal")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--addr", default=None, help="HOST:PORT")
    p.add_argument("--data", default=None, help="data directory")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (PoolTestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
