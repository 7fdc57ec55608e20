"""Command-line entry points.

Subcommands: ``gen`` (synthetic instance), ``solve`` (run one solver on an
instance), ``sigma`` (map-width calibration), ``mitigate-bench`` (sparse-state
mitigation benchmark), ``report`` (aggregate run records to CSV).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .circuit import solve_sigma
from .generator import GeneratorSpec, generate_instance
from .harness import RunConfig, load_records, resolve_noise, run_from_config, save_record
from .mitigation import sparse_state_benchmark
from .model import load_instance
from .report import write_report


def _cmd_gen(args) -> int:
    doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    spec = GeneratorSpec(
        n_transactions=int(doc["n_transactions"]),
        securities=int(doc.get("securities", 3)),
        parties=int(doc.get("parties", 6)),
        after_links=int(doc.get("after_links", 0)),
        collateral_fraction=float(doc.get("collateral_fraction", 0.5)),
        tightness=float(doc.get("tightness", 0.7)),
        seed=int(doc.get("seed", 0)),
    )
    instance = generate_instance(spec)
    Path(args.out).write_text(instance.to_json(), encoding="utf-8")
    print(f"wrote {args.out} ({instance.n_transactions} transactions)")
    return 0


def _cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    else:
        doc = {}
    if args.solver:
        doc["solver"] = args.solver
    if args.seed is not None:
        doc["seed"] = args.seed
    config = RunConfig.from_document(doc)
    record = run_from_config(instance, config)
    path = save_record(record, args.out)
    print(
        f"{record.solver}: valid={record.valid} payoff={record.payoff:.5f} "
        f"rho={'-' if record.rho is None else f'{record.rho:.5f}'} explored={record.explored}"
    )
    print(f"wrote {path}")
    return 0


def _cmd_sigma(args) -> int:
    sigma = solve_sigma(args.n, args.shots, args.delta)
    print(f"{sigma:.5f}")
    return 0


def _cmd_mitigate_bench(args) -> int:
    noise = resolve_noise(args.preset) if args.preset else None
    if noise is None and (args.flip01 is not None or args.flip10 is not None):
        from .circuit import ReadoutNoise

        noise = ReadoutNoise(flip01=args.flip01 or 0.015, flip10=args.flip10 or 0.015)
    rows = sparse_state_benchmark(
        sizes=tuple(int(s) for s in args.sizes.split(",")),
        runs=args.runs,
        shots=args.shots,
        noise=noise,
        seed=args.seed,
    )
    fields = ["n", "run", "shots", "flip01", "flip10", "fidelity_raw", "fidelity_mitigated"]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    by_n: dict[int, list] = {}
    for row in rows:
        by_n.setdefault(row["n"], []).append(row)
    for n, group in sorted(by_n.items()):
        raw = sum(r["fidelity_raw"] for r in group) / len(group)
        mit = sum(r["fidelity_mitigated"] for r in group) / len(group)
        print(f"n={n}: raw={raw:.4f} mitigated={mit:.4f} ({len(group)} runs)")
    print(f"wrote {args.out}")
    return 0


def _cmd_report(args) -> int:
    records = load_records(args.runs)
    main, traces = write_report(records, args.out)
    print(f"wrote {main} and {traces} ({len(records)} runs)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="settleopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic instance")
    gen.add_argument("--spec", required=True, help="generator spec JSON")
    gen.add_argument("--out", required=True, help="instance JSON to write")
    gen.set_defaults(func=_cmd_gen)

    solve = sub.add_parser("solve", help="run a solver on an instance")
    solve.add_argument("--solver", choices=["qtsa", "qinsp", "sampler", "exact"])
    solve.add_argument("--instance", required=True)
    solve.add_argument("--config", help="run-config JSON (defaults otherwise)")
    solve.add_argument("--seed", type=int)
    solve.add_argument("--out", required=True, help="directory for the run record")
    solve.set_defaults(func=_cmd_solve)

    sigma = sub.add_parser("sigma", help="map-width calibration for a target support")
    sigma.add_argument("--n", type=int, required=True)
    sigma.add_argument("--shots", type=int, required=True)
    sigma.add_argument("--delta", type=int, required=True)
    sigma.set_defaults(func=_cmd_sigma)

    bench = sub.add_parser("mitigate-bench", help="sparse-state mitigation benchmark")
    bench.add_argument("--sizes", default="12,16", help="comma-separated register sizes")
    bench.add_argument("--runs", type=int, default=10)
    bench.add_argument("--shots", type=int, default=4000)
    bench.add_argument("--preset", choices=["eagle-like", "heron-like"])
    bench.add_argument("--flip01", type=float)
    bench.add_argument("--flip10", type=float)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", required=True, help="CSV to write")
    bench.set_defaults(func=_cmd_mitigate_bench)

    report = sub.add_parser("report", help="aggregate run records to CSV")
    report.add_argument("--runs", required=True, help="directory of run JSON records")
    report.add_argument("--out", required=True, help="main CSV path")
    report.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
