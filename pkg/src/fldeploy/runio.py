"""Writers for experiment outputs: round reports, summaries, run manifests."""

from __future__ import annotations

import csv
import datetime
import json
from pathlib import Path

from pydantic import BaseModel

from . import __version__
from .simulation import RoundReport

REPORT_COLUMNS = [
    "round",
    "strategy",
    "deployed",
    "reported",
    "discarded",
    "accuracy",
    "available",
    "data_volume",
    "distinct_labels",
    "f1",
    "f2",
    "f3",
    "f4",
    "f5",
    "scalar",
]


class RunManifest(BaseModel):
    tool_version: str
    started_at: str
    finished_at: str
    seeds: list[int]
    config: dict
    outputs: list[str]


def utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def report_row(report: RoundReport) -> list:
    obj = report.objective_vector
    return [
        report.round_index,
        report.strategy,
        report.deployed_count,
        report.reported_count,
        "true" if report.discarded else "false",
        repr(report.test_accuracy),
        report.available_clients,
        report.data_volume,
        report.distinct_labels,
        repr(obj.f1) if obj else "",
        repr(obj.f2) if obj else "",
        repr(obj.f3) if obj else "",
        repr(obj.f4) if obj else "",
        repr(obj.f5) if obj else "",
        repr(obj.scalar) if obj else "",
    ]


def write_reports_csv(path: str | Path, reports: list[RoundReport]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for report in reports:
            writer.writerow(report_row(report))
    return path


def write_reports_json(path: str | Path, reports: list[RoundReport]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.model_dump() for r in reports], fh, indent=2)
        fh.write("\n")
    return path


def write_merged_csv(
    path: str | Path, runs: list[tuple[int, list[RoundReport]]]
) -> Path:
    """One CSV over several runs, prefixed with the seed column."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed"] + REPORT_COLUMNS)
        for seed, reports in runs:
            for report in reports:
                writer.writerow([seed] + report_row(report))
    return path


def rounds_to_target(reports: list[RoundReport], target: float) -> int | None:
    for report in reports:
        if not report.discarded and report.test_accuracy >= target:
            return report.round_index
    return None


def summarize_run(reports: list[RoundReport], target: float | None) -> dict:
    n = len(reports)
    discards = sum(1 for r in reports if r.discarded)
    return {
        "rounds": n,
        "discard_fraction": discards / n if n else 0.0,
        "mean_available_clients": (
            sum(r.available_clients for r in reports) / n if n else 0.0
        ),
        "mean_data_volume": sum(r.data_volume for r in reports) / n if n else 0.0,
        "mean_distinct_labels": (
            sum(r.distinct_labels for r in reports) / n if n else 0.0
        ),
        "final_accuracy": reports[-1].test_accuracy if reports else 0.0,
        "rounds_to_target": rounds_to_target(reports, target) if target else None,
    }


def average_summaries(per_seed: dict[int, dict]) -> dict:
    keys = [
        "discard_fraction",
        "mean_available_clients",
        "mean_data_volume",
        "mean_distinct_labels",
        "final_accuracy",
    ]
    out: dict = {"seeds": sorted(per_seed)}
    for key in keys:
        values = [per_seed[s][key] for s in sorted(per_seed)]
        out[f"{key}_mean"] = sum(values) / len(values) if values else 0.0
    reached = [
        per_seed[s]["rounds_to_target"]
        for s in sorted(per_seed)
        if per_seed[s]["rounds_to_target"] is not None
    ]
    out["rounds_to_target_mean"] = sum(reached) / len(reached) if reached else None
    out["target_reached_seeds"] = len(reached)
    return out


def write_json(path: str | Path, payload) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path
