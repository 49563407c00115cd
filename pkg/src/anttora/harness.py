"""Experiment orchestration: seeded runs, reports, and trace replay.

A run is (scenario, seed, mode) -> (trace, metrics). An experiment repeats
the run over derived seeds (base seed + repetition index), aggregates the
scalar metrics, and writes machine-readable reports plus the trace files
used for golden regression and replay.
"""

from __future__ import annotations

import json
import os

from .engine import Simulation
from .metrics import RunMetrics, compute_metrics, read_trace, validate_trace_order
from .scenario import Scenario

REPORT_SCHEMA = "anttora-report-v1"


def run_single(
    scenario: Scenario, seed: int | None = None, mode: str | None = None
) -> tuple[list[str], RunMetrics, Simulation]:
    """One seeded run; metrics are computed from the serialized trace."""
    sim = Simulation(scenario, seed=seed, mode=mode).run()
    lines = sim.trace_lines()
    return lines, compute_metrics(lines), sim


def _summary_stat(values: list[float]) -> dict:
    if not values:
        return {"mean": 0.0, "min": 0.0, "max": 0.0}
    return {"mean": sum(values) / len(values), "min": min(values), "max": max(values)}


def run_experiment(
    scenario: Scenario,
    repetitions: int = 1,
    mode: str | None = None,
    base_seed: int | None = None,
    trace_path: str | None = None,
) -> dict:
    """Run ``repetitions`` seeded runs and aggregate their metrics.

    Seed derivation is documented and reproducible: run k uses
    ``base_seed + k``. When ``trace_path`` is given, single runs write to it
    directly and repeated runs append ``_r<k>`` before the extension.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    base = scenario.seed if base_seed is None else base_seed
    runs = []
    for k in range(repetitions):
        seed = base + k
        lines, metrics, _sim = run_single(scenario, seed=seed, mode=mode)
        if trace_path is not None:
            path = trace_path if repetitions == 1 else _numbered(trace_path, k)
            write_trace(path, lines)
        runs.append({"seed": seed, "metrics": metrics.to_dict()})
    report = {
        "schema": REPORT_SCHEMA,
        "mode": mode or scenario.mode,
        "base_seed": base,
        "repetitions": repetitions,
        "runs": runs,
        "summary": {
            "pdr": _summary_stat([r["metrics"]["pdr"] for r in runs]),
            "mean_end_to_end_delay": _summary_stat(
                [r["metrics"]["mean_end_to_end_delay"] for r in runs]
            ),
            "control_packets_total": _summary_stat(
                [float(sum(r["metrics"]["control_packets"].values())) for r in runs]
            ),
            "energy_spent_total": _summary_stat(
                [sum(r["metrics"]["energy_spent"].values()) for r in runs]
            ),
        },
    }
    return report


def _numbered(path: str, k: int) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_r{k}{ext}"


def write_trace(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def write_report(path: str, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def replay(trace_path: str) -> RunMetrics:
    """Recompute metrics from a trace file; must equal the original report."""
    lines = read_trace(trace_path)
    validate_trace_order(lines)
    return compute_metrics(lines)


def summary_table(report: dict) -> str:
    """Small plain-text rendition of an experiment report."""
    rows = [
        ("runs", str(report["repetitions"])),
        ("mode", report["mode"]),
        ("base seed", str(report["base_seed"])),
    ]
    for key in ("pdr", "mean_end_to_end_delay", "control_packets_total", "energy_spent_total"):
        st = report["summary"][key]
        rows.append((key, f"mean={st['mean']:.6g} min={st['min']:.6g} max={st['max']:.6g}"))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)
