import json
import math

import pytest

from cityexplore.aggregate import AggregationParams
from cityexplore.engine import SessionState, TabooConfig, TaskConfig
from cityexplore.errors import InvalidParams
from cityexplore.geo import haversine_distance
from cityexplore.sim import (
    ExperimentConfig,
    WorkerPolicy,
    config_to_json,
    run_experiment,
    write_bundle,
)
from cityexplore.world import WorldParams, generate_synthetic_world


def sim_world(seed=2, n_pois=12):
    return generate_synthetic_world(
        WorldParams(grid_rows=10, grid_cols=10, spacing_m=15.0, n_pois=n_pois, seed=seed)
    )


def separated_world(n_pois, min_gap_m=30.0):
    """A world whose PoIs sit farther apart than the clustering radius, so
    per-spot invariants are not blurred by merged clusters."""
    for seed in range(200):
        w = generate_synthetic_world(
            WorldParams(
                grid_rows=14, grid_cols=14, spacing_m=15.0, n_pois=n_pois, seed=seed
            )
        )
        gaps = [
            haversine_distance(a.position, b.position)
            for i, a in enumerate(w.pois)
            for b in w.pois[i + 1 :]
        ]
        if not gaps or min(gaps) > min_gap_m:
            return w
    raise AssertionError("no sufficiently separated world found")


def basic_config(**kw):
    defaults = dict(
        task=TaskConfig(num_executions=8, num_instances=3),
        policy=WorkerPolicy(detection_prob=0.8),
        seed=5,
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestConfigs:
    def test_policy_validation(self):
        with pytest.raises(InvalidParams):
            WorkerPolicy(detection_prob=1.5)
        with pytest.raises(InvalidParams):
            WorkerPolicy(kind="psychic")

    def test_schedule_validation(self):
        with pytest.raises(InvalidParams):
            ExperimentConfig(schedule="parallel-universe")

    def test_taboo_default_filled_in(self):
        cfg = ExperimentConfig(task=TaskConfig(strategy="taboo"))
        assert cfg.taboo == TabooConfig()

    def test_config_json_serializable(self):
        cfg = basic_config()
        doc = config_to_json(cfg)
        json.dumps(doc)
        assert doc["seed"] == 5
        assert doc["task"]["num_executions"] == 8


class TestRunBasic:
    def test_completes_requested_executions(self):
        result = run_experiment(sim_world(), basic_config())
        exp = result.experiment
        assert exp.finished_count == 8
        states = {s.state for s in exp.sessions.values()}
        assert states <= {SessionState.COMPLETED, SessionState.ESCAPED}
        # basic strategy can only complete
        assert states == {SessionState.COMPLETED}
        assert result.total_detections == 8 * 3

    def test_deterministic(self):
        r1 = run_experiment(sim_world(), basic_config())
        r2 = run_experiment(sim_world(), basic_config())
        d1 = [(d.id, d.centroid.lat, d.centroid.lon) for d in r1.experiment.detections]
        d2 = [(d.id, d.centroid.lat, d.centroid.lon) for d in r2.experiment.detections]
        assert d1 == d2
        assert r1.experiment.action_log_jsonl() == r2.experiment.action_log_jsonl()
        assert r1.heatmap == r2.heatmap

    def test_seed_matters(self):
        r1 = run_experiment(sim_world(), basic_config(seed=5))
        r2 = run_experiment(sim_world(), basic_config(seed=6))
        assert (
            r1.experiment.action_log_jsonl() != r2.experiment.action_log_jsonl()
        )

    def test_detections_near_ground_truth(self):
        world = sim_world()
        result = run_experiment(world, basic_config())
        for det in result.experiment.detections:
            nearest = min(
                haversine_distance(det.centroid, poi.position) for poi in world.pois
            )
            # exact aim (no heading noise): centroid sits on the PoI
            assert nearest < 0.5

    def test_zero_detection_prob_terminates(self):
        cfg = basic_config(
            policy=WorkerPolicy(detection_prob=0.0),
            max_sessions=10,
            step_cap=200,
        )
        result = run_experiment(sim_world(), cfg)
        assert result.total_detections == 0
        assert result.experiment.finished_count == 0
        assert result.n_abandoned == 10

    def test_greedy_policy_covers_more(self):
        # same budget, greedy exploration should visit at least as many nodes
        world = sim_world(n_pois=0)
        cap = 150
        random_cfg = basic_config(
            policy=WorkerPolicy(kind="random", detection_prob=0.0),
            max_sessions=1,
            step_cap=cap,
        )
        greedy_cfg = basic_config(
            policy=WorkerPolicy(kind="greedy", detection_prob=0.0),
            max_sessions=1,
            step_cap=cap,
        )
        r_random = run_experiment(world, random_cfg)
        r_greedy = run_experiment(world, greedy_cfg)
        visited_random = sum(1 for v in r_random.heatmap.values() if v)
        visited_greedy = sum(1 for v in r_greedy.heatmap.values() if v)
        assert visited_greedy > visited_random

    def test_heading_noise_spreads_detections(self):
        world = sim_world()
        noisy = basic_config(policy=WorkerPolicy(detection_prob=0.8, heading_noise_deg=2.0))
        result = run_experiment(world, noisy)
        assert result.total_detections > 0
        offsets = [
            min(haversine_distance(d.centroid, poi.position) for poi in world.pois)
            for d in result.experiment.detections
        ]
        assert max(offsets) > 0.05  # noise visibly shifts the triangulation
        for det in result.experiment.detections:
            assert det.dmax < 10.0  # accepted ones still satisfy the threshold


class TestRunTaboo:
    def taboo_config(self, schedule="sequential", **kw):
        defaults = dict(
            task=TaskConfig(strategy="taboo", num_executions=30, num_instances=5),
            taboo=TabooConfig(),
            policy=WorkerPolicy(detection_prob=0.8),
            schedule=schedule,
            seed=7,
        )
        defaults.update(kw)
        return ExperimentConfig(**defaults)

    def test_sequential_respects_threshold(self):
        world = separated_world(n_pois=8)
        result = run_experiment(world, self.taboo_config())
        assert result.experiment.finished_count == 30
        threshold = result.config.taboo.taboo_threshold
        for cluster in result.clusters:
            assert cluster.distinct_workers <= threshold

    def test_interleaved_bounded_overshoot(self):
        world = separated_world(n_pois=8)
        k = 3
        result = run_experiment(
            world, self.taboo_config(schedule="interleaved", interleave_k=k)
        )
        threshold = result.config.taboo.taboo_threshold
        for cluster in result.clusters:
            # k concurrent sessions share a stale snapshot, so a spot can
            # collect at most k extra workers past the threshold
            assert cluster.distinct_workers <= threshold - 1 + k

    def test_escapes_happen(self):
        world = sim_world(n_pois=4)  # few PoIs: workers run out of targets
        result = run_experiment(
            world,
            self.taboo_config(task=TaskConfig(strategy="taboo", num_executions=15)),
        )
        states = [s.state for s in result.experiment.sessions.values()]
        assert SessionState.ESCAPED in states

    def test_total_detections_drop_vs_basic(self):
        world = sim_world(n_pois=12)
        n_exec = 30
        basic = run_experiment(
            world,
            basic_config(task=TaskConfig(num_executions=n_exec, num_instances=5)),
        )
        taboo = run_experiment(
            world,
            self.taboo_config(task=TaskConfig(strategy="taboo", num_executions=n_exec)),
        )
        assert taboo.experiment.finished_count == basic.experiment.finished_count == n_exec
        assert taboo.total_detections < basic.total_detections


class TestBundle:
    FILES = (
        "config.json",
        "world.geojson",
        "actions.jsonl",
        "detections.geojson",
        "confirmed.geojson",
        "sessions.csv",
        "coverage.csv",
        "metrics.csv",
    )

    def test_writes_all_files(self, tmp_path):
        world = sim_world()
        result = run_experiment(world, basic_config())
        out = tmp_path / "bundle"
        write_bundle(result, world, str(out))
        for name in self.FILES:
            assert (out / name).exists(), name
        metrics = dict(
            line.split(",") for line in (out / "metrics.csv").read_text().splitlines()[1:]
        )
        assert int(metrics["total_detections"]) == result.total_detections
        assert int(metrics["confirmed_count"]) == result.confirmed_count
        assert float(metrics["coverage_percent"]) == result.coverage_percent

    def test_byte_deterministic(self, tmp_path):
        world = sim_world()
        out1, out2 = tmp_path / "one", tmp_path / "two"
        write_bundle(run_experiment(world, basic_config()), world, str(out1))
        write_bundle(run_experiment(world, basic_config()), world, str(out2))
        for name in self.FILES:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_actions_jsonl_parses(self, tmp_path):
        world = sim_world()
        result = run_experiment(world, basic_config())
        out = tmp_path / "bundle"
        write_bundle(result, world, str(out))
        lines = (out / "actions.jsonl").read_text().splitlines()
        assert lines
        for ln in lines:
            entry = json.loads(ln)
            assert set(entry) == {"session_id", "t", "kind", "payload"}
