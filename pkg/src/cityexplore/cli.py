"""Command line interface.

Subcommands: gen-world, run-sim, aggregate, compare, sample-curve,
coverage, behavior, serve, plot-data. Exit codes: 0 success, 1 usage
error, 2 data error. VCE_DATA_DIR overrides the default store path.

Config files are flat key-value text: one ``key = value`` per line,
``#`` starts a comment. See README for the recognized keys per command.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass

import click

from .aggregate import AggregationParams, clusters_geojson, consolidate
from .engine import TabooConfig, TaskConfig
from .errors import CityExploreError, DataError
from .evaluate import (
    PoIMap,
    behavior_csv,
    behavior_stats,
    comparison_csv,
    detections_per_confirmed,
    escape_scatter_csv,
    match_maps,
    sampling_curve,
    sampling_curve_csv,
)
from .geo import GeoPoint
from .sim import ExperimentConfig, WorkerPolicy, run_experiment, write_bundle
from .world import (
    VisitCounter,
    WorldParams,
    coverage as coverage_of,
    generate_synthetic_world,
    heatmap_csv,
    load_world,
    save_world,
)


def parse_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` config file; '#' comments; blank lines ignored."""
    out: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected 'key = value'")
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    return out


def _get(cfg: dict, key: str, cast, default):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except ValueError as exc:
        raise DataError(f"bad value for {key}: {cfg[key]!r}") from exc


@dataclass(frozen=True)
class _LoadedDetection:
    """Detection reloaded from a bundle; enough for aggregation/evaluation."""

    id: str
    worker_id: str
    session_id: str
    centroid: GeoPoint


def load_detections(path: str) -> list[_LoadedDetection]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
        out = []
        for i, f in enumerate(doc["features"]):
            lon, lat = f["geometry"]["coordinates"]
            props = f["properties"]
            out.append(
                _LoadedDetection(
                    id=props.get("id", f"d{i:05d}"),
                    worker_id=props["worker_id"],
                    session_id=props["session_id"],
                    centroid=GeoPoint(lat, lon),
                )
            )
        return out
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise DataError(f"cannot read detections {path}: {exc}") from exc


def load_poi_map(path: str, name: str) -> PoIMap:
    try:
        with open(path) as fh:
            doc = json.load(fh)
        points = []
        for i, f in enumerate(doc["features"]):
            if f["geometry"]["type"] != "Point":
                continue
            lon, lat = f["geometry"]["coordinates"]
            props = f.get("properties", {})
            pid = str(props.get("id", props.get("cluster_id", i)))
            points.append((pid, GeoPoint(lat, lon)))
        return PoIMap(name=name, points=tuple(points))
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise DataError(f"cannot read map {path}: {exc}") from exc


def load_actions(path: str) -> list[dict]:
    try:
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read action log {path}: {exc}") from exc


@click.group()
def cli() -> None:
    """Street-view exploration simulator and analysis toolkit."""


@cli.command("gen-world")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--out", "outdir", required=True, type=click.Path())
def gen_world(config_path: str, seed: int | None, outdir: str) -> None:
    """Generate a synthetic grid world and write world.geojson."""
    cfg = parse_config(config_path)
    params = WorldParams(
        grid_rows=_get(cfg, "grid_rows", int, 5),
        grid_cols=_get(cfg, "grid_cols", int, 5),
        spacing_m=_get(cfg, "spacing_m", float, 15.0),
        n_pois=_get(cfg, "n_pois", int, 10),
        sight_radius_m=_get(cfg, "sight_radius_m", float, 25.0),
        seed=seed if seed is not None else _get(cfg, "seed", int, 0),
        origin=GeoPoint(
            _get(cfg, "origin_lat", float, 46.07), _get(cfg, "origin_lon", float, 11.12)
        ),
        margin_m=_get(cfg, "margin_m", float, 10.0),
        visible_range_m=_get(cfg, "visible_range_m", float, 150.0),
        poi_min_gap_m=_get(cfg, "poi_min_gap_m", float, 0.0),
    )
    world = generate_synthetic_world(params)
    os.makedirs(outdir, exist_ok=True)
    save_world(world, os.path.join(outdir, "world.geojson"))
    click.echo(
        f"world: {len(world.graph)} nodes, {len(world.graph.edges)} edges, "
        f"{len(world.pois)} PoIs -> {outdir}/world.geojson"
    )


def experiment_config_from_file(
    cfg: dict[str, str],
    seed: int | None = None,
    strategy: str | None = None,
    schedule: str | None = None,
) -> tuple[str, ExperimentConfig]:
    """Build (world_path, ExperimentConfig) from a parsed config file."""
    if "world" not in cfg:
        raise DataError("config must set world = <path to world.geojson>")
    strategy = strategy or cfg.get("strategy", "basic")
    task = TaskConfig(
        strategy=strategy,
        num_executions=_get(cfg, "num_executions", int, 60),
        num_instances=_get(cfg, "num_instances", int, 5),
        reward=_get(cfg, "reward", float, 0.20),
        delta_m=_get(cfg, "delta_m", float, 10.0),
        move_cost_s=_get(cfg, "move_cost_s", float, 4.0),
        shot_cost_s=_get(cfg, "shot_cost_s", float, 3.0),
        submit_cost_s=_get(cfg, "submit_cost_s", float, 2.0),
    )
    taboo = None
    if strategy == "taboo":
        taboo = TabooConfig(
            taboo_threshold=_get(cfg, "taboo_threshold", int, 3),
            escape_distance_m=_get(cfg, "escape_distance_m", float, 1800.0),
            escape_time_s=_get(cfg, "escape_time_s", float, 180.0),
            taboo_radius_m=_get(cfg, "taboo_radius_m", float, 10.0),
            escape_mode=cfg.get("escape_mode", "and"),
        )
    schedule_str = schedule or cfg.get("schedule", "seq")
    if schedule_str in ("seq", "sequential"):
        sched, k = "sequential", 3
    elif schedule_str.startswith("interleaved"):
        sched = "interleaved"
        k = int(schedule_str.split(":", 1)[1]) if ":" in schedule_str else 3
    else:
        raise DataError(f"unknown schedule {schedule_str!r}")
    config = ExperimentConfig(
        task=task,
        taboo=taboo,
        aggregation=AggregationParams(
            eps_m=_get(cfg, "eps_m", float, 10.0), min_pts=_get(cfg, "min_pts", int, 3)
        ),
        policy=WorkerPolicy(
            kind=cfg.get("policy", "random"),
            detection_prob=_get(cfg, "detection_prob", float, 1.0),
            heading_noise_deg=_get(cfg, "heading_noise_deg", float, 0.0),
        ),
        schedule=sched,
        interleave_k=k,
        step_cap=_get(cfg, "step_cap", int, 5000),
        max_sessions=_get(cfg, "max_sessions", int, None) if "max_sessions" in cfg else None,
        seed=seed if seed is not None else _get(cfg, "seed", int, 0),
    )
    return cfg["world"], config


@cli.command("run-sim")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--out", "outdir", required=True, type=click.Path())
@click.option("--strategy", type=click.Choice(["basic", "taboo"]), default=None)
@click.option("--schedule", default=None, help="seq or interleaved:K")
def run_sim(config_path, seed, outdir, strategy, schedule) -> None:
    """Run a simulated experiment and archive the result bundle."""
    cfg = parse_config(config_path)
    world_path, config = experiment_config_from_file(cfg, seed, strategy, schedule)
    world = load_world(world_path)
    result = run_experiment(world, config)
    write_bundle(result, world, outdir)
    click.echo(
        f"finished {result.experiment.finished_count} executions: "
        f"{result.total_detections} detections, {result.confirmed_count} confirmed, "
        f"coverage {result.coverage_percent:.1f}% -> {outdir}"
    )


@cli.command("aggregate")
@click.argument("detections_path", type=click.Path())
@click.option("--eps", type=float, default=10.0)
@click.option("--min-pts", type=int, default=3)
@click.option("--out", "out_path", required=True, type=click.Path())
def aggregate_cmd(detections_path, eps, min_pts, out_path) -> None:
    """Consolidate a detections GeoJSON into a confirmed-PoI GeoJSON."""
    detections = load_detections(detections_path)
    clusters = consolidate(detections, AggregationParams(eps_m=eps, min_pts=min_pts))
    with open(out_path, "w") as fh:
        json.dump(clusters_geojson(clusters), fh, sort_keys=True, indent=1)
        fh.write("\n")
    click.echo(f"{len(clusters)} confirmed PoIs -> {out_path}")


@cli.command("compare")
@click.option("--a", "path_a", required=True, type=click.Path())
@click.option("--b", "path_b", required=True, type=click.Path())
@click.option("--threshold", type=float, default=10.0)
@click.option("--out", "out_path", default=None, type=click.Path())
def compare(path_a, path_b, threshold, out_path) -> None:
    """Match two PoI maps and report overlap cardinalities and Jaccard."""
    map_a = load_poi_map(path_a, os.path.basename(path_a))
    map_b = load_poi_map(path_b, os.path.basename(path_b))
    csv = comparison_csv([match_maps(map_a, map_b, threshold)])
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(csv)
    click.echo(csv, nl=False)


def _detections_by_session(detections) -> list[list]:
    groups: dict[str, list] = {}
    for d in detections:
        groups.setdefault(d.session_id, []).append(d)
    return [groups[k] for k in sorted(groups)]


@cli.command("sample-curve")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path())
@click.option("--samples", type=int, default=200)
@click.option("--seed", type=int, default=0)
@click.option("--eps", type=float, default=10.0)
@click.option("--min-pts", type=int, default=3)
@click.option("--out", "out_path", default=None, type=click.Path())
def sample_curve(bundle_dir, samples, seed, eps, min_pts, out_path) -> None:
    """Confirmed-count vs number-of-executions sampling curve for a bundle."""
    detections = load_detections(os.path.join(bundle_dir, "detections.geojson"))
    executions = _detections_by_session(detections)
    curve = sampling_curve(
        executions, AggregationParams(eps_m=eps, min_pts=min_pts), samples, seed
    )
    csv = sampling_curve_csv(curve)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(csv)
    click.echo(csv, nl=False)


@cli.command("coverage")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path())
def coverage_cmd(bundle_dir, out_path) -> None:
    """Recompute coverage and the heatmap from a bundle's action log."""
    world = load_world(os.path.join(bundle_dir, "world.geojson"))
    entries = load_actions(os.path.join(bundle_dir, "actions.jsonl"))
    visits = VisitCounter(set(world.graph.nodes))
    for e in entries:
        if e["kind"] == "move":
            visits.record(e["payload"]["node"])
    pct, heatmap = coverage_of(world.graph, visits)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(heatmap_csv(world, heatmap))
    click.echo(f"coverage: {pct:.1f}% of {len(world.graph)} nodes")


@cli.command("behavior")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path())
@click.option("--out", "outdir", required=True, type=click.Path())
def behavior(bundle_dir, outdir) -> None:
    """Per-session behavior stats and the escape scatter."""
    entries = load_actions(os.path.join(bundle_dir, "actions.jsonl"))
    stats = behavior_stats(entries)
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "behavior.csv"), "w") as fh:
        fh.write(behavior_csv(stats))
    cfg = _bundle_config(bundle_dir)
    taboo = (cfg or {}).get("taboo") or {}
    with open(os.path.join(outdir, "escape_scatter.csv"), "w") as fh:
        fh.write(
            escape_scatter_csv(
                stats, taboo.get("escape_distance_m"), taboo.get("escape_time_s")
            )
        )
    click.echo(f"{len(stats)} sessions -> {outdir}")


def _bundle_config(bundle_dir: str) -> dict | None:
    path = os.path.join(bundle_dir, "config.json")
    if not os.path.isfile(path):
        return None
    with open(path) as fh:
        return json.load(fh)


@cli.command("plot-data")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path())
@click.option("--out", "outdir", required=True, type=click.Path())
@click.option("--samples", type=int, default=200)
@click.option("--seed", type=int, default=0)
def plot_data(bundle_dir, outdir, samples, seed) -> None:
    """Emit one CSV per figure-style analysis for a result bundle."""
    os.makedirs(outdir, exist_ok=True)
    detections = load_detections(os.path.join(bundle_dir, "detections.geojson"))
    entries = load_actions(os.path.join(bundle_dir, "actions.jsonl"))
    cfg = _bundle_config(bundle_dir) or {}
    agg = cfg.get("aggregation") or {}
    params = AggregationParams(eps_m=agg.get("eps_m", 10.0), min_pts=agg.get("min_pts", 3))

    curve = sampling_curve(_detections_by_session(detections), params, samples, seed)
    with open(os.path.join(outdir, "sampling_curve.csv"), "w") as fh:
        fh.write(sampling_curve_csv(curve))

    clusters = consolidate(detections, params)
    with open(os.path.join(outdir, "detections_per_confirmed.csv"), "w") as fh:
        fh.write("rank,n_detections\n")
        fh.writelines(
            f"{i},{n}\n" for i, n in enumerate(detections_per_confirmed(clusters))
        )

    stats = behavior_stats(entries)
    with open(os.path.join(outdir, "behavior.csv"), "w") as fh:
        fh.write(behavior_csv(stats))
    taboo = cfg.get("taboo") or {}
    with open(os.path.join(outdir, "escape_scatter.csv"), "w") as fh:
        fh.write(
            escape_scatter_csv(
                stats, taboo.get("escape_distance_m"), taboo.get("escape_time_s")
            )
        )

    max_errors = 5
    histogram = [0] * (max_errors + 2)  # 0..5 and >5
    for s in stats:
        n = sum(s.error_counts.values())
        histogram[min(n, max_errors + 1)] += 1
    with open(os.path.join(outdir, "error_histogram.csv"), "w") as fh:
        fh.write("n_errors,n_workers\n")
        for i, count in enumerate(histogram):
            label = str(i) if i <= max_errors else f">{max_errors}"
            fh.write(f"{label},{count}\n")

    with open(os.path.join(outdir, "steps_after_detection.csv"), "w") as fh:
        fh.write("session_id,detection_index,steps\n")
        for s in stats:
            fh.writelines(
                f"{s.session_id},{i},{steps}\n"
                for i, steps in enumerate(s.steps_after_detection)
            )
    click.echo(f"plot data -> {outdir}")


@cli.command("serve")
@click.option("--data", "data_dir", default=None, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(data_dir, host, port) -> None:
    """Run the HTTP API."""
    import uvicorn

    from .service import Store, create_app

    data_dir = data_dir or os.environ.get("VCE_DATA_DIR")
    app = create_app(Store(data_dir))
    uvicorn.run(app, host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except (CityExploreError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
