"""Operations behind the service endpoints; the CLI calls these directly
when no remote server is given, so both entry points share one code path."""

from __future__ import annotations

from pathlib import Path

from pydantic import BaseModel, Field

from .domain import ProblemInstance, SelectionVector, ValidationReport, validate_instance
from .ga import GaConfig, ParetoArchive, solve
from .mobility import WorldConfig, build_datasets, generate_traces, generate_world, write_world_bundle
from .objectives import ObjectiveVector, eval_objectives
from .oracle import enumerate_pareto
from .runio import (
    RunManifest,
    average_summaries,
    summarize_run,
    utc_now,
    write_json,
    write_merged_csv,
    write_reports_csv,
    write_reports_json,
)
from .simulation import SimConfig, load_bundle, resolve_target, run_experiment
from . import __version__


class ArchiveEntryModel(BaseModel):
    genes: list[int]
    f1: float
    f2: float
    f3: float
    f4: float
    f5: float
    scalar: float


class OptimizeResult(BaseModel):
    archive: list[ArchiveEntryModel]
    recommendation: SelectionVector
    objectives: ObjectiveVector


class OracleResult(BaseModel):
    front: list[ArchiveEntryModel]


class SimulateResult(BaseModel):
    manifest: RunManifest
    target_accuracy: float | None
    per_seed: dict[int, dict]
    summary: dict


class CompareStrategyResult(BaseModel):
    strategy: str
    summary: dict
    per_seed: dict[int, dict]


class CompareResult(BaseModel):
    manifest: RunManifest
    target_accuracy: float
    strategies: list[CompareStrategyResult]


def _archive_entries(archive: ParetoArchive) -> list[ArchiveEntryModel]:
    return [ArchiveEntryModel.model_validate(row) for row in archive.to_json_entries()]


def op_validate(instance: ProblemInstance) -> ValidationReport:
    return validate_instance(instance)


def op_optimize(instance: ProblemInstance, ga: GaConfig) -> OptimizeResult:
    archive, recommendation = solve(instance, ga)
    return OptimizeResult(
        archive=_archive_entries(archive),
        recommendation=recommendation,
        objectives=eval_objectives(instance, recommendation),
    )


def op_oracle(instance: ProblemInstance) -> OracleResult:
    return OracleResult(front=_archive_entries(enumerate_pareto(instance)))


def op_generate(cfg: WorldConfig, out_dir: str | Path) -> RunManifest:
    started = utc_now()
    world = generate_world(cfg)
    traces = generate_traces(world)
    datasets, _ = build_datasets(world, traces)
    paths = write_world_bundle(out_dir, world, traces, datasets)
    manifest = RunManifest(
        tool_version=__version__,
        started_at=started,
        finished_at=utc_now(),
        seeds=[cfg.seed],
        config=cfg.model_dump(),
        outputs=[str(p) for p in paths],
    )
    write_json(Path(out_dir) / "manifest.json", manifest.model_dump())
    return manifest


def op_simulate(
    world_dir: str | Path,
    cfg: SimConfig,
    out_dir: str | Path,
    seeds: list[int] | None = None,
) -> SimulateResult:
    started = utc_now()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = load_bundle(world_dir)
    seeds = seeds if seeds else [cfg.seed]
    target = resolve_target(bundle, cfg)

    outputs: list[str] = []
    per_seed: dict[int, dict] = {}
    runs = []
    for seed in seeds:
        run_cfg = cfg.model_copy(update={"seed": seed, "target_accuracy": target})
        reports = run_experiment(bundle, run_cfg)
        runs.append((seed, reports))
        csv_path = write_reports_csv(out / f"reports_seed{seed}.csv", reports)
        json_path = write_reports_json(out / f"reports_seed{seed}.json", reports)
        outputs.extend([str(csv_path), str(json_path)])
        per_seed[seed] = summarize_run(reports, target)

    summary = average_summaries(per_seed)
    summary["target_accuracy"] = target
    summary["strategy"] = cfg.strategy.value
    outputs.append(str(write_json(out / "summary.json", summary)))

    manifest = RunManifest(
        tool_version=__version__,
        started_at=started,
        finished_at=utc_now(),
        seeds=list(seeds),
        config=cfg.model_dump(mode="json"),
        outputs=outputs,
    )
    write_json(out / "manifest.json", manifest.model_dump())
    return SimulateResult(
        manifest=manifest, target_accuracy=target, per_seed=per_seed, summary=summary
    )


def op_compare(
    world_dir: str | Path,
    configs: list[SimConfig],
    out_dir: str | Path,
    seeds: list[int] | None = None,
) -> CompareResult:
    if len(configs) < 2:
        raise ValueError("compare needs at least two configs")
    started = utc_now()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = load_bundle(world_dir)
    seeds = seeds if seeds else [configs[0].seed]
    # one shared convergence target so strategies race to the same line
    target = resolve_target(bundle, configs[0])

    outputs: list[str] = []
    results: list[CompareStrategyResult] = []
    merged: list[tuple[int, list]] = []
    for cfg in configs:
        per_seed: dict[int, dict] = {}
        for seed in seeds:
            run_cfg = cfg.model_copy(
                update={"seed": seed, "target_accuracy": target}
            )
            reports = run_experiment(bundle, run_cfg)
            merged.append((seed, reports))
            csv_path = write_reports_csv(
                out / f"reports_{cfg.strategy.value}_seed{seed}.csv", reports
            )
            outputs.append(str(csv_path))
            per_seed[seed] = summarize_run(reports, target)
        summary = average_summaries(per_seed)
        summary["strategy"] = cfg.strategy.value
        results.append(
            CompareStrategyResult(
                strategy=cfg.strategy.value, summary=summary, per_seed=per_seed
            )
        )

    outputs.append(str(write_merged_csv(out / "merged_rounds.csv", merged)))
    table = {
        "target_accuracy": target,
        "strategies": [r.summary for r in results],
    }
    outputs.append(str(write_json(out / "comparison.json", table)))

    manifest = RunManifest(
        tool_version=__version__,
        started_at=started,
        finished_at=utc_now(),
        seeds=list(seeds),
        config={"configs": [c.model_dump(mode="json") for c in configs]},
        outputs=outputs,
    )
    write_json(out / "manifest.json", manifest.model_dump())
    return CompareResult(manifest=manifest, target_accuracy=target, strategies=results)
