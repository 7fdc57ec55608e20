"""CSV aggregation of run records.

The main document holds one row per run plus per-solver-and-instance summary
rows (mean and standard deviation of the payoff ratio); the companion traces
document holds the per-iteration telemetry in long format.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .harness import RunRecord

RUN_FIELDS = [
    "row_type", "solver", "instance", "seed", "rho", "payoff", "valid",
    "explored", "iterations_to_first_valid", "rho_mean", "rho_std", "runs",
]
TRACE_FIELDS = ["solver", "instance", "seed", "iteration", "expected_cost", "best_cost", "valid_mass"]


def run_rows(records: list[RunRecord]) -> list[dict]:
    rows = []
    for r in sorted(records, key=lambda r: (r.solver, r.instance_label, r.seed)):
        rows.append(
            {
                "row_type": "run",
                "solver": r.solver,
                "instance": r.instance_label,
                "seed": r.seed,
                "rho": "" if r.rho is None else repr(r.rho),
                "payoff": repr(r.payoff),
                "valid": int(r.valid),
                "explored": r.explored,
                "iterations_to_first_valid": ""
                if r.iterations_to_first_valid is None
                else r.iterations_to_first_valid,
                "rho_mean": "",
                "rho_std": "",
                "runs": "",
            }
        )
    return rows


def summary_rows(records: list[RunRecord]) -> list[dict]:
    groups: dict[tuple[str, str], list[float]] = {}
    for r in records:
        if r.rho is None:
            continue
        groups.setdefault((r.solver, r.instance_label), []).append(r.rho)
    rows = []
    for (solver, instance), rhos in sorted(groups.items()):
        arr = np.array(rhos)
        rows.append(
            {
                "row_type": "summary",
                "solver": solver,
                "instance": instance,
                "seed": "",
                "rho": "",
                "payoff": "",
                "valid": "",
                "explored": "",
                "iterations_to_first_valid": "",
                "rho_mean": repr(float(arr.mean())),
                "rho_std": repr(float(arr.std())),
                "runs": len(rhos),
            }
        )
    return rows


def trace_rows(records: list[RunRecord]) -> list[dict]:
    rows = []
    for r in sorted(records, key=lambda r: (r.solver, r.instance_label, r.seed)):
        for i, (ec, bc, vm) in enumerate(
            zip(r.expected_cost_trace, r.best_cost_trace, r.valid_mass_trace)
        ):
            rows.append(
                {
                    "solver": r.solver,
                    "instance": r.instance_label,
                    "seed": r.seed,
                    "iteration": i + 1,
                    "expected_cost": repr(ec),
                    "best_cost": repr(bc),
                    "valid_mass": repr(vm),
                }
            )
    return rows


def write_report(records: list[RunRecord], out_path) -> tuple[Path, Path]:
    """Write the main and traces CSVs; returns both paths."""
    if not records:
        raise ValueError("no records to report")
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RUN_FIELDS)
        writer.writeheader()
        writer.writerows(run_rows(records))
        writer.writerows(summary_rows(records))
    traces = out.with_name(out.stem + "_traces.csv")
    with open(traces, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        writer.writeheader()
        writer.writerows(trace_rows(records))
    return out, traces
