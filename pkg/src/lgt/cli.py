"""Command-line front end: generate instances, run policies, verify, bench.

Exit codes: 0 success, 1 usage or I/O error, 2 invariant-monitor violation
(including any FAIL line from the verification suite).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .adversaries import (
    MaxMassAdversary,
    adaptive_dfs_lengths,
    gen_alternating,
    gen_comb,
    gen_random,
    gen_star,
    load_instance,
    save_instance,
)
from .baselines import POLICY_KINDS
from .errors import LgtError, UsageError
from .harness import RunConfig, derive_seed, report, report_stats, run_fractional, run_randomized
from .verify import run_suite


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lgt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen.add_argument("kind", choices=["star", "comb", "alternating", "random"])
    gen.add_argument("--width", type=int, default=None)
    gen.add_argument("--depth", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--split-prob", type=float, default=0.3)
    gen.add_argument("--kill-prob", type=float, default=0.1)
    gen.add_argument("--tooth-spacing", type=int, default=None)
    gen.add_argument("-o", "--output", required=True)

    run = sub.add_parser("run", help="run one policy on an instance or adversary")
    run.add_argument("--policy", choices=POLICY_KINDS, required=True)
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", help="instance JSON file")
    src.add_argument("--adversary", choices=["max_mass", "dfs_lengths"])
    run.add_argument("--width", type=int, default=None, help="adversary width")
    run.add_argument("--depth", type=int, default=None, help="adversary horizon")
    run.add_argument("--mode", choices=["fractional", "randomized"], default="fractional")
    run.add_argument("--trials", type=int, default=100)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument(
        "--monitor-potential",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="default: on for the entropic policy",
    )
    run.add_argument("--report", required=True)
    run.add_argument("--format", choices=["csv", "json"], default="csv")

    ver = sub.add_parser("verify", help="run the numerical verification suite")
    ver.add_argument(
        "--suite",
        default="all",
        choices=["all", "lemma1", "dynamics", "movement", "growth", "potential", "identity"],
    )
    ver.add_argument("--seed", type=int, default=42)

    bench = sub.add_parser("bench", help="sweep policies over generated instances")
    bench.add_argument("--widths", default="2,4,8,16,32")
    bench.add_argument("--depth", type=int, required=True)
    bench.add_argument("--policies", default="entropic,dfs")
    bench.add_argument("--instances", default="star,comb,alternating,random")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--report", required=True)
    bench.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def _cmd_gen(args) -> int:
    if args.kind == "star":
        if args.width is None:
            raise UsageError("gen star requires --width")
        instance = gen_star(args.width, args.depth)
    elif args.kind == "comb":
        if args.width is None:
            raise UsageError("gen comb requires --width")
        instance = gen_comb(args.width, args.depth, tooth_spacing=args.tooth_spacing)
    elif args.kind == "alternating":
        instance = gen_alternating(args.depth)
    else:
        if args.width is None:
            raise UsageError("gen random requires --width")
        instance = gen_random(
            args.width, args.depth, args.seed,
            split_prob=args.split_prob, kill_prob=args.kill_prob,
        )
    save_instance(instance, args.output)
    print(f"wrote {instance.name} ({instance.depth} layers, width {instance.width}) to {args.output}")
    return 0


def _cmd_run(args) -> int:
    config = RunConfig(
        mode=args.mode,
        trials=args.trials,
        seed=args.seed,
        potential_monitor=args.monitor_potential,
    )
    if args.instance is not None:
        source = load_instance(args.instance)
    elif args.adversary == "max_mass":
        if args.width is None or args.depth is None:
            raise UsageError("--adversary max_mass requires --width and --depth")
        source = MaxMassAdversary(args.width, args.depth)
    else:
        if args.width is None or args.depth is None:
            raise UsageError("--adversary dfs_lengths requires --width and --depth")
        source = adaptive_dfs_lengths(args.width, args.depth, list(range(args.width)))

    if args.mode == "randomized":
        if not hasattr(source, "layers"):
            raise UsageError("randomized mode requires an offline instance")
        stats = run_randomized(args.policy, source, config)
        report_stats([stats], args.format, args.report)
        print(
            f"{stats.run_id}: mean cost {stats.mean_cost:.6g} "
            f"(stderr {stats.stderr:.3g}, {stats.trials} trials, opt {stats.opt})"
        )
        return 0

    trace = run_fractional(args.policy, source, config)
    report([trace], args.format, args.report)
    print(
        f"{trace.run_id}: cost {trace.total_cost:.6g} over {trace.steps[-1].t} layers, "
        f"ratio {trace.final_ratio:.6g}"
    )
    if not trace.monitor_ok():
        print(f"potential monitor violated: worst slack {trace.worst_potential_slack():.6g}")
        return 2
    return 0


def _cmd_verify(args) -> int:
    results = run_suite(args.suite, args.seed)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 2


def _cmd_bench(args) -> int:
    widths = [int(w) for w in args.widths.split(",") if w]
    policies = [p for p in args.policies.split(",") if p]
    kinds = [k for k in args.instances.split(",") if k]
    for p in policies:
        if p not in POLICY_KINDS:
            raise UsageError(f"unknown policy {p!r}")

    cells = []
    for kind in kinds:
        if kind == "alternating":
            instances = [gen_alternating(args.depth)]
        elif kind == "star":
            instances = [gen_star(w, max(args.depth, w)) for w in widths]
        elif kind == "comb":
            instances = [gen_comb(w, max(args.depth, 2 * w + 1)) for w in widths]
        elif kind == "random":
            instances = [
                gen_random(w, args.depth, derive_seed(args.seed, f"bench-{w}") % 2**31)
                for w in widths
            ]
        else:
            raise UsageError(f"unknown instance kind {kind!r}")
        for inst in instances:
            for policy in policies:
                cells.append((policy, inst))

    def run_cell(cell):
        policy, inst = cell
        return run_fractional(policy, inst, RunConfig(seed=args.seed))

    threads = int(os.environ.get("LGT_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(run_cell, cells))
    else:
        traces = [run_cell(cell) for cell in cells]
    report(traces, args.format, args.report)
    print(f"wrote {len(traces)} runs to {args.report}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_bench(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except LgtError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())
