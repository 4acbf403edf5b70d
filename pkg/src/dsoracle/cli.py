"""``dsoracle`` command line: build, query, continuum, verify, bench.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numerical guard.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import harness, oracle
from .errors import NumericalGuardError, OracleError, SingularSystemError
from .evaporation import continuum_sweep, default_grid, min_safe_alpha
from .generate import random_graph
from .graph import Policy, read_graph
from .reference import dijkstra_reduced

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_failures(text: str) -> tuple[int, ...]:
    """``"1,4 7"`` -> ``(1, 4, 7)``; empty text means no failures."""
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        ids = [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"failure list {text!r} is not a list of node ids") from None
    if len(set(ids)) != len(ids):
        raise UsageError(f"failure list {text!r} repeats a node")
    return tuple(ids)


def parse_alphas(text: str) -> list[float]:
    try:
        alphas = [float(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"alpha grid {text!r} is not a list of numbers") from None
    if not alphas or any(not 0 < a <= 1 for a in alphas):
        raise UsageError("alphas must be a non-empty list of values in (0, 1]")
    return alphas


def parse_bits(text: str):
    if text in ("auto", "none"):
        return None if text == "none" else "auto"
    try:
        bits = int(text)
    except ValueError:
        raise UsageError(f"--bits takes 'auto', 'none' or an integer, got {text!r}") from None
    if bits < 53:
        raise UsageError("--bits must be at least 53")
    return bits


def _load_graph(args):
    path = Path(args.graph)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    g = read_graph(path)
    if args.diameter_bound is not None:
        g = g.with_diameter_bound(args.diameter_bound)
    elif args.exact_diameter:
        g = g.with_exact_diameter()
    return g


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_build(args) -> int:
    g = _load_graph(args)
    if args.alpha is not None and not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    o = oracle.preprocess(g, args.alpha, policy=args.policy, unsafe=args.unsafe)
    oracle.save(o, args.output)
    print(f"n\t{o.n}")
    print(f"alpha\t{o.alpha!r}")
    print(f"bound\t{o.bound!r}")
    print(f"safe\t{str(o.safe).lower()}")
    print(f"residual\t{o.residual():.3e}")
    if not args.no_timing:
        print(f"build_seconds\t{o.build_seconds:.6f}")
    return EXIT_OK


def cmd_query(args) -> int:
    path = Path(args.oracle)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    failures = parse_failures(args.failures)
    if args.target in failures:
        raise UsageError(f"target {args.target} in failure set")
    o = oracle.load(path, bits=parse_bits(args.bits))
    started = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", oracle.UnsafeAlphaWarning)
        result = oracle.query(o, args.target, failures)
    elapsed = time.perf_counter() - started
    if args.format == "dot":
        text = result.to_dot(o.weights)
    elif args.format == "tsv":
        rows = ["node\tstatus\tsuccessor\tdistance"]
        for i in range(o.n):
            succ, dist = result.successor[i], result.distance[i]
            rows.append(f"{i}\t{result.status[i].value}\t{'' if succ is None else succ}\t"
                        f"{'' if dist is None else f'{dist:g}'}")
        text = "\n".join(rows) + "\n"
    else:
        text = result.dump_json() + "\n"
    _emit(text, args.out)
    if not o.safe:
        print(f"warning: alpha={o.alpha:g} exceeds the safe bound {o.bound:.6g}", file=sys.stderr)
    if not args.no_timing:
        print(f"query_seconds\t{elapsed:.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_continuum(args) -> int:
    g = _load_graph(args)
    if not 0 <= args.target < g.n:
        raise UsageError(f"target {args.target} outside [0, {g.n})")
    alphas = parse_alphas(args.alphas) if args.alphas else default_grid(g)
    report = continuum_sweep(g, args.target, alphas, policy=args.policy, reference=True)
    if args.format == "dot":
        text = "".join(report.to_dot(k) for k in range(len(report.points)))
    else:
        text = report.dump_json() + "\n"
    _emit(text, args.out)
    if args.dot_dir:
        for p in report.write_dot(args.dot_dir):
            print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.max_n < 1:
        raise UsageError("--max-n must be at least 1")
    if args.instances < 1:
        raise UsageError("--instances must be at least 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    reports = harness.verify_corpus(args.seed, args.instances, jobs=args.jobs, max_n=args.max_n,
                                    bits=parse_bits(args.bits), inject_fault=args.perturb,
                                    policy=args.policy)
    mismatches = [m for r in reports for m in r.mismatches]
    queries = sum(r.queries for r in reports)
    for m in mismatches[:args.show]:
        print(m)
    print(f"{args.instances} instances, {queries} queries, {len(mismatches)} mismatches")
    return EXIT_OK if not mismatches else EXIT_MISMATCH


def _median_seconds(fn, trials: int) -> float:
    times = []
    for _ in range(trials):
        started = time.perf_counter()
        fn()
        times.append(time.perf_counter() - started)
    return statistics.median(times)


def cmd_bench(args) -> int:
    sizes = parse_failures(args.f)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.n < 2 or not sizes or any(f < 0 or f > args.n - 2 for f in sizes):
        raise UsageError("need n >= 2 and every f in [0, n - 2]")
    rng = np.random.default_rng(args.seed)
    g = random_graph(rng, args.n, max_out_degree=args.max_out_degree, extra_edges=args.extra_edges)
    # the safe bound underflows at this scale; benchmark at the smallest
    # alpha the underflow guard admits
    alpha = args.alpha if args.alpha is not None else min_safe_alpha(g.diameter_bound)
    build = []
    o = None
    for _ in range(args.trials):
        o = oracle.preprocess(g, alpha, policy=args.policy, unsafe=True)
        build.append(o.build_seconds)
    header = ["n", "m", "f", "trials", "alpha", "query_status"]
    if not args.no_timing:
        header += ["preprocess_s", "query_s", "dijkstra_s", "preprocess_over_query"]
    rows = ["\t".join(header)]

    def run_query(t, failures):
        # double precision can lose very long detours; the guard then
        # stops the tree walk, which is reported rather than hidden
        try:
            oracle.query(o, t, failures, raw_cost=False)
            return "ok"
        except NumericalGuardError:
            return "guard"

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", oracle.UnsafeAlphaWarning)
        for f in sizes:
            t = int(rng.integers(g.n))
            others = np.array([x for x in range(g.n) if x != t])
            failures = tuple(sorted(rng.choice(others, size=f, replace=False).tolist()))
            status = run_query(t, failures)
            row = [str(g.n), str(g.m), str(f), str(args.trials), f"{alpha:.6g}", status]
            if not args.no_timing:
                q = _median_seconds(lambda: run_query(t, failures), args.trials)
                d = _median_seconds(lambda: dijkstra_reduced(g, t, failures), args.trials)
                pre = statistics.median(build)
                row += [f"{pre:.6f}", f"{q:.6f}", f"{d:.6f}", f"{pre / q:.1f}"]
            rows.append("\t".join(row))
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def _graph_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-g", "--graph", required=True, help="edge-list graph file")
    p.add_argument("--policy", choices=[x.value for x in Policy], default=Policy.DEGREE_WEIGHTED.value)
    p.add_argument("--exact-diameter", action="store_true",
                   help="use the exact weighted diameter instead of (n-1)*w_max")
    p.add_argument("--diameter-bound", type=float, help="caller-supplied diameter bound")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsoracle", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="preprocess a graph into an oracle file")
    _graph_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--unsafe", action="store_true", help="allow alpha above the safe bound")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="replacement shortest-path tree for (*, t, F)")
    p.add_argument("-o", "--oracle", required=True)
    p.add_argument("-t", "--target", type=int, required=True)
    p.add_argument("-F", "--failures", default="", help='comma separated node ids; "" for none')
    p.add_argument("--format", choices=["json", "dot", "tsv"], default="json")
    p.add_argument("--bits", default="auto", help="extended precision: auto, none or a bit count")
    p.add_argument("--out")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("continuum", help="sweep alpha and report costs, flows and edge probabilities")
    _graph_flags(p)
    p.add_argument("-t", "--target", type=int, required=True)
    p.add_argument("--alphas", help="comma separated grid (default: bound, 0.3, 0.6, 0.9, 1)")
    p.add_argument("--format", choices=["json", "dot"], default="json")
    p.add_argument("--dot-dir", help="write one DOT file per alpha here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_continuum)

    p = sub.add_parser("verify", help="oracle versus Dijkstra on a seeded random corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--max-n", type=int, default=25)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--perturb", action="store_true", help="zero one stored entry per instance")
    p.add_argument("--policy", choices=[x.value for x in Policy], default=Policy.DEGREE_WEIGHTED.value)
    p.add_argument("--bits", default="auto")
    p.add_argument("--show", type=int, default=20, help="mismatch lines to print")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="median query time against Dijkstra recomputation")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--f", default="5", help="failure-set sizes, comma separated")
    p.add_argument("--trials", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-out-degree", type=int, default=4)
    p.add_argument("--extra-edges", type=float, default=1.0)
    p.add_argument("--policy", choices=[x.value for x in Policy], default=Policy.DEGREE_WEIGHTED.value)
    p.add_argument("--out")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NumericalGuardError, SingularSystemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, OracleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
