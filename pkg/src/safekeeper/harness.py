"""The `harness` CLI: attack scenarios, benchmarks, interop vectors."""

from __future__ import annotations

import argparse
import json
import sys

from .bench import BENCH_TARGETS, attempts_table_cost, run_bench
from .scenarios import SCENARIOS, run_scenario
from .vectors import export_vectors


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="harness",
        description="replay attack scenarios and benchmarks against the "
        "password-hardening stack",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    run_p.add_argument("scenario", choices=sorted(SCENARIOS))
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--json", action="store_true", help="machine-readable report")

    bench_p = sub.add_parser("bench", help="measure throughput")
    bench_p.add_argument("target", choices=sorted(BENCH_TARGETS) + ["memory"])
    bench_p.add_argument("--duration", type=float, default=2.0)
    bench_p.add_argument(
        "--entries", type=int, default=100_000,
        help="salt count for the memory target",
    )
    bench_p.add_argument("--json", action="store_true")

    sub.add_parser("list", help="list scenarios and bench targets")

    vec_p = sub.add_parser(
        "vectors", help="export interop test vectors for other implementations"
    )
    vec_p.add_argument("--out", required=True)
    vec_p.add_argument("--seed", type=int, default=424242)

    args = parser.parse_args(argv)

    if args.command == "run":
        report = run_scenario(args.scenario, args.seed)
        if args.json:
            print(json.dumps(report.to_dict(), indent=2))
        else:
            print(report.to_text())
        return 0 if report.ok else 1

    if args.command == "bench":
        if args.target == "memory":
            result = attempts_table_cost(args.entries)
        else:
            result = run_bench(args.target, args.duration)
        if args.json:
            print(json.dumps(result, indent=2))
        else:
            for key, value in result.items():
                print(f"{key}: {value}")
        return 0

    if args.command == "list":
        print("scenarios:")
        for name in sorted(SCENARIOS):
            print(f"  {name}")
        print("bench targets:")
        for name in sorted(BENCH_TARGETS) + ["memory"]:
            print(f"  {name}")
        return 0

    if args.command == "vectors":
        export_vectors(args.out, args.seed)
        print(f"wrote vectors to {args.out}")
        return 0

    parser.error("unreachable")
    return 2


if __name__ == "__main__":
    sys.exit(main())
