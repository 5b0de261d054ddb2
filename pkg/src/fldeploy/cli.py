"""Command-line client for the deployment toolkit.

Commands run against the in-process operations layer by default; pass
``--server URL`` to send the same request to a running service instead.
Exit codes: 0 success, 2 unusable input or config, 3 infeasible problem.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx
from pydantic import ValidationError

from . import __version__, ops
from .domain import ProblemInstance, load_instance
from .ga import GaConfig, InfeasibleInstanceError
from .mobility import WorldConfig
from .simulation import SimConfig

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        _fail(EXIT_CONFIG, f"file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_CONFIG, f"invalid JSON in {path}: {exc}")


def _parse_model(model_cls, payload: dict, source: str):
    try:
        return model_cls.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "<root>"
        _fail(EXIT_CONFIG, f"{source}: field '{field}': {first['msg']}")


def _load_instance(path: str) -> ProblemInstance:
    return _parse_model(ProblemInstance, _load_json(path), path)


def _load_sim_config(path: str | None) -> tuple[SimConfig, str | None]:
    """Sim config file, optionally carrying a 'world' reference to cross-check."""
    if path is None:
        return SimConfig(), None
    payload = _load_json(path)
    world_ref = payload.pop("world", None)
    return _parse_model(SimConfig, payload, path), world_ref


def _remote(server: str, path: str, payload: dict) -> dict:
    url = server.rstrip("/") + path
    try:
        resp = httpx.post(url, json=payload, timeout=None)
    except httpx.HTTPError as exc:
        _fail(EXIT_CONFIG, f"cannot reach server {server}: {exc}")
    if resp.status_code >= 400:
        try:
            body = resp.json()
        except json.JSONDecodeError:
            body = {}
        kind = body.get("kind", "config")
        detail = body.get("detail", resp.text)
        _fail(EXIT_INFEASIBLE if kind == "infeasible" else EXIT_CONFIG, str(detail))
    return resp.json()


def _run_local(fn):
    try:
        return fn()
    except InfeasibleInstanceError as exc:
        _fail(EXIT_INFEASIBLE, f"infeasible problem: {exc}")
    except (ValueError, FileNotFoundError, ValidationError) as exc:
        _fail(EXIT_CONFIG, str(exc))


def _parse_seeds(seeds: str | None) -> list[int] | None:
    if seeds is None:
        return None
    try:
        return [int(part) for part in seeds.split(",") if part.strip() != ""]
    except ValueError:
        _fail(EXIT_CONFIG, f"invalid --seeds value: {seeds!r}")


def _write_out(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


@click.group()
@click.version_option(version=__version__)
@click.option("--server", default=None, help="Base URL of a running service.")
@click.pass_context
def main(ctx: click.Context, server: str | None):
    ctx.obj = {"server": server}


@main.command()
@click.option("--config", "config_path", default=None, help="World config JSON.")
@click.option("--out", "out_dir", required=True, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.pass_context
def generate(ctx, config_path, out_dir, seed):
    """Generate a synthetic mobility world: traces, datasets, summary."""
    payload = _load_json(config_path) if config_path else {}
    cfg = _parse_model(WorldConfig, payload, config_path or "<defaults>")
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    server = ctx.obj["server"]
    if server:
        body = {"config": cfg.model_dump(), "out_dir": out_dir}
        result = _remote(server, "/generate", body)
        manifest = result["manifest"]
    else:
        manifest = _run_local(lambda: ops.op_generate(cfg, out_dir)).model_dump()
    click.echo(f"world written to {out_dir} ({len(manifest['outputs'])} files)")


@main.command()
@click.argument("instance_path")
@click.option("--ga-config", "ga_path", default=None, help="GA config JSON.")
@click.option("--out", "out_path", default="archive.json", help="Archive output file.")
@click.option("--seed", type=int, default=None, help="Override the GA seed.")
@click.pass_context
def optimize(ctx, instance_path, ga_path, out_path, seed):
    """Solve one deployment instance; write the archive and recommendation."""
    instance = _load_instance(instance_path)
    ga = _parse_model(GaConfig, _load_json(ga_path), ga_path) if ga_path else GaConfig()
    if seed is not None:
        ga = ga.model_copy(update={"seed": seed})
    server = ctx.obj["server"]
    if server:
        body = {"instance": instance.model_dump(), "ga": ga.model_dump()}
        result = _remote(server, "/optimize", body)
    else:
        result = _run_local(lambda: ops.op_optimize(instance, ga)).model_dump()
    _write_out(out_path, result)
    genes = result["recommendation"]["genes"]
    click.echo(
        f"archive of {len(result['archive'])} selections written to {out_path}; "
        f"recommended deployment selects {sum(genes)} clients"
    )


@main.command()
@click.argument("instance_path")
@click.option("--out", "out_path", default="front.json", help="Front output file.")
@click.pass_context
def oracle(ctx, instance_path, out_path):
    """Exhaustively enumerate the exact Pareto front (small instances only)."""
    instance = _load_instance(instance_path)
    server = ctx.obj["server"]
    if server:
        result = _remote(server, "/oracle", {"instance": instance.model_dump()})
    else:
        result = _run_local(lambda: ops.op_oracle(instance)).model_dump()
    _write_out(out_path, result)
    click.echo(f"exact front of {len(result['front'])} selections written to {out_path}")


@main.command()
@click.argument("world_dir")
@click.option("--config", "config_path", default=None, help="Sim config JSON.")
@click.option("--out", "out_dir", required=True, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--seeds", default=None, help="Comma-separated seed batch.")
@click.pass_context
def simulate(ctx, world_dir, config_path, out_dir, seed, seeds):
    """Run one strategy over a generated world; write round reports."""
    cfg, world_ref = _load_sim_config(config_path)
    if world_ref is not None and Path(world_ref) != Path(world_dir):
        _fail(EXIT_CONFIG, f"config references world {world_ref!r}, got {world_dir!r}")
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    seed_list = _parse_seeds(seeds)
    server = ctx.obj["server"]
    if server:
        body = {
            "world_dir": world_dir,
            "config": cfg.model_dump(mode="json"),
            "out_dir": out_dir,
            "seeds": seed_list,
        }
        result = _remote(server, "/simulate", body)
    else:
        result = _run_local(
            lambda: ops.op_simulate(world_dir, cfg, out_dir, seed_list)
        ).model_dump(mode="json")
    summary = result["summary"]
    click.echo(
        f"{summary['strategy']}: {len(result['per_seed'])} run(s), "
        f"mean discard fraction {summary['discard_fraction_mean']:.3f}, "
        f"mean final accuracy {summary['final_accuracy_mean']:.3f}; "
        f"reports in {out_dir}"
    )


@main.command()
@click.argument("world_dir")
@click.option(
    "--config",
    "config_paths",
    multiple=True,
    required=True,
    help="Sim config JSON (repeat per strategy).",
)
@click.option("--out", "out_dir", required=True, help="Output directory.")
@click.option("--seeds", default=None, help="Comma-separated seed batch.")
@click.pass_context
def compare(ctx, world_dir, config_paths, out_dir, seeds):
    """Run several strategies on the identical world and summarize side by side."""
    if len(config_paths) < 2:
        _fail(EXIT_CONFIG, "compare needs at least two --config files")
    configs = []
    for path in config_paths:
        cfg, world_ref = _load_sim_config(path)
        if world_ref is not None and Path(world_ref) != Path(world_dir):
            _fail(EXIT_CONFIG, f"config {path} references world {world_ref!r}, got {world_dir!r}")
        configs.append(cfg)
    seed_list = _parse_seeds(seeds)
    server = ctx.obj["server"]
    if server:
        body = {
            "world_dir": world_dir,
            "configs": [c.model_dump(mode="json") for c in configs],
            "out_dir": out_dir,
            "seeds": seed_list,
        }
        result = _remote(server, "/compare", body)
    else:
        result = _run_local(
            lambda: ops.op_compare(world_dir, configs, out_dir, seed_list)
        ).model_dump(mode="json")
    click.echo(f"target accuracy: {result['target_accuracy']:.3f}")
    header = f"{'strategy':<22}{'rounds->target':>15}{'discard frac':>14}{'avail mean':>12}{'final acc':>11}"
    click.echo(header)
    for row in result["strategies"]:
        s = row["summary"]
        rtt = s["rounds_to_target_mean"]
        click.echo(
            f"{row['strategy']:<22}"
            f"{(f'{rtt:.1f}' if rtt is not None else 'n/a'):>15}"
            f"{s['discard_fraction_mean']:>14.3f}"
            f"{s['mean_available_clients_mean']:>12.1f}"
            f"{s['final_accuracy_mean']:>11.3f}"
        )
    click.echo(f"detailed outputs in {out_dir}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("fldeploy.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
