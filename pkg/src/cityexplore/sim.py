"""Simulated worker policies and the experiment runner.

Policies exist to exercise the engine's dynamics (saturation, taboo
savings); they make no claim of modeling human behavior. Runs are fully
reproducible from the configured seeds under both the sequential and the
deterministic round-robin interleaved schedule.
"""

from __future__ import annotations

import json
import os
import random
from collections import deque
from dataclasses import dataclass, field

from .aggregate import AggregationParams, PoICluster, clusters_geojson, consolidate
from .engine import (
    Experiment,
    Session,
    SessionState,
    SubmitStatus,
    TabooConfig,
    TaskConfig,
)
from .errors import InvalidParams
from .geo import GeoPoint, Heading, haversine_distance, local_bearing, project_local
from .world import World, coverage, heatmap_csv, save_world


@dataclass(frozen=True)
class WorkerPolicy:
    kind: str = "random"  # "random" | "greedy"
    detection_prob: float = 1.0
    heading_noise_deg: float = 0.0
    backtrack_avoid_prob: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 <= self.detection_prob <= 1.0:
            raise InvalidParams("detection_prob must be in [0, 1]")
        if self.kind not in ("random", "greedy"):
            raise InvalidParams(f"unknown policy kind {self.kind!r}")


@dataclass(frozen=True)
class Action:
    kind: str  # "move" | "shoot" | "discard" | "submit" | "abandon"
    target: str | None = None
    heading: Heading | None = None
    index: int = 0


@dataclass(frozen=True)
class SessionView:
    """What a policy may observe about its own session."""

    current_node: str
    neighbors: frozenset[str]
    visible_nodes: frozenset[str]
    pending_shots: int
    n_detections: int
    own_centroids: tuple[GeoPoint, ...]
    taboo_snapshot: tuple[GeoPoint, ...]


def session_view(exp: Experiment, session: Session) -> SessionView:
    node = exp.world.graph.node(session.current_node)
    return SessionView(
        current_node=node.id,
        neighbors=node.neighbors,
        visible_nodes=node.visible_nodes,
        pending_shots=len(session.pending_shots),
        n_detections=len(session.detections),
        own_centroids=tuple(d.centroid for d in session.detections),
        taboo_snapshot=tuple(session.taboo_snapshot),
    )


class ExplorerPolicy:
    """Random or greedy explorer with a three-shot capture maneuver.

    On sighting an eligible ground-truth PoI (and the detection probability
    firing, rolled once per PoI per session), the policy walks to three
    spread-out nodes in the PoI's visibility set, shoots from each with the
    exact bearing plus Gaussian aiming noise, then submits.
    """

    def __init__(self, params: WorkerPolicy, world: World, seed: int, taboo_radius_m: float = 10.0):
        self.params = params
        self.world = world
        self.rng = random.Random(seed)
        self.taboo_radius_m = taboo_radius_m
        self.prev_node: str | None = None
        self.session_visited: set[str] = set()
        self.ignored_pois: set[str] = set()  # rolled no / rejected / already captured
        self.plan: deque[Action] = deque()
        self._poi_by_id = {p.id: p for p in world.pois}
        self._pois_at_node: dict[str, list[str]] = {}
        for poi in world.pois:
            for nid in poi.visible_from:
                self._pois_at_node.setdefault(nid, []).append(poi.id)
        for ids in self._pois_at_node.values():
            ids.sort()
        self._local = {
            nid: project_local(world.origin, n.position) for nid, n in world.graph.nodes.items()
        }
        self._pending_target: str | None = None

    # -- feedback from the engine --------------------------------------------

    def observe_submit(self, status: SubmitStatus) -> None:
        if self._pending_target is None:
            return
        self.ignored_pois.add(self._pending_target)
        if status is not SubmitStatus.ACCEPTED:
            # drop the failed shots before doing anything else
            self.plan.clear()
            self.plan.extend([Action("discard", index=0)] * 3)
        self._pending_target = None

    # -- decision -------------------------------------------------------------

    def next_action(self, view: SessionView) -> Action:
        self.session_visited.add(view.current_node)
        if self.plan:
            return self.plan.popleft()
        sighted = self._eligible_poi(view)
        if sighted is not None and self._plan_capture(sighted, view):
            return self.plan.popleft()
        return self._walk(view)

    def _eligible_poi(self, view: SessionView) -> str | None:
        for pid in self._pois_at_node.get(view.current_node, []):
            if pid in self.ignored_pois:
                continue
            poi = self._poi_by_id[pid]
            if any(
                haversine_distance(poi.position, c) < self.taboo_radius_m
                for c in view.own_centroids
            ):
                self.ignored_pois.add(pid)
                continue
            if any(
                haversine_distance(poi.position, t) < self.taboo_radius_m
                for t in view.taboo_snapshot
            ):
                self.ignored_pois.add(pid)
                continue
            if self.rng.random() >= self.params.detection_prob:
                self.ignored_pois.add(pid)  # one roll per sighting
                continue
            return pid
        return None

    def _plan_capture(self, poi_id: str, view: SessionView) -> bool:
        poi = self._poi_by_id[poi_id]
        candidates = sorted(nid for nid in poi.visible_from if nid in self.world.graph.nodes)
        if len(candidates) < 3:
            self.ignored_pois.add(poi_id)
            return False
        poi_local = project_local(self.world.origin, poi.position)
        bearings = {
            nid: local_bearing(poi_local, self._local[nid]).degrees for nid in candidates
        }

        def ang_diff(a: float, b: float) -> float:
            d = abs(a - b) % 360.0
            return min(d, 360.0 - d)

        # first shot node: closest to the worker; then maximize angular spread at the PoI
        here = self._local[view.current_node]
        chosen = [
            min(
                candidates,
                key=lambda nid: (
                    (self._local[nid].x - here.x) ** 2 + (self._local[nid].y - here.y) ** 2,
                    nid,
                ),
            )
        ]
        while len(chosen) < 3:
            rest = [nid for nid in candidates if nid not in chosen]
            chosen.append(
                max(
                    rest,
                    key=lambda nid: (
                        min(ang_diff(bearings[nid], bearings[c]) for c in chosen),
                        nid,
                    ),
                )
            )

        plan: list[Action] = []
        pos = view.current_node
        for nid in chosen:
            path = self._shortest_path(pos, nid)
            if path is None:
                self.ignored_pois.add(poi_id)
                return False
            plan.extend(Action("move", target=step) for step in path)
            aim = local_bearing(self._local[nid], poi_local).degrees
            noise = (
                self.rng.gauss(0.0, self.params.heading_noise_deg)
                if self.params.heading_noise_deg > 0
                else 0.0
            )
            plan.append(Action("shoot", heading=Heading(aim + noise)))
            pos = nid
        plan.append(Action("submit"))
        self.plan.extend(plan)
        self._pending_target = poi_id
        return True

    def _shortest_path(self, src: str, dst: str) -> list[str] | None:
        """BFS over neighbor edges; returns the node sequence after src."""
        if src == dst:
            return []
        prev: dict[str, str] = {src: src}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nxt in sorted(self.world.graph.node(cur).neighbors):
                if nxt in prev:
                    continue
                prev[nxt] = cur
                if nxt == dst:
                    path = [dst]
                    while path[-1] != src:
                        path.append(prev[path[-1]])
                    path.reverse()
                    return path[1:]
                queue.append(nxt)
        return None

    def _walk(self, view: SessionView) -> Action:
        if self.params.kind == "greedy":
            target = self._nearest_unvisited(view.current_node)
            if target is not None:
                path = self._shortest_path(view.current_node, target)
                if path:
                    self.plan.extend(Action("move", target=step) for step in path[1:])
                    self.prev_node = view.current_node
                    return Action("move", target=path[0])
        options = sorted(view.neighbors)
        if not options:
            return Action("abandon")
        pick = self.rng.choice(options)
        if (
            pick == self.prev_node
            and len(options) > 1
            and self.rng.random() < self.params.backtrack_avoid_prob
        ):
            pick = self.rng.choice([n for n in options if n != self.prev_node])
        self.prev_node = view.current_node
        return Action("move", target=pick)

    def _nearest_unvisited(self, src: str) -> str | None:
        seen = {src}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nxt in sorted(self.world.graph.node(cur).neighbors):
                if nxt in seen:
                    continue
                if nxt not in self.session_visited:
                    return nxt
                seen.add(nxt)
                queue.append(nxt)
        return None


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskConfig = TaskConfig()
    taboo: TabooConfig | None = None
    aggregation: AggregationParams = AggregationParams()
    policy: WorkerPolicy = WorkerPolicy()
    schedule: str = "sequential"  # "sequential" | "interleaved"
    interleave_k: int = 3
    step_cap: int = 5000
    max_sessions: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.schedule not in ("sequential", "interleaved"):
            raise InvalidParams(f"unknown schedule {self.schedule!r}")
        if self.task.strategy == "taboo" and self.taboo is None:
            object.__setattr__(self, "taboo", TabooConfig())


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    experiment: Experiment
    clusters: list[PoICluster]
    coverage_percent: float
    heatmap: dict[str, int]
    n_abandoned: int
    session_order: list[str] = field(default_factory=list)  # finish order

    @property
    def total_detections(self) -> int:
        return len(self.experiment.detections)

    @property
    def confirmed_count(self) -> int:
        return len(self.clusters)


class _Driver:
    """Owns one session: feeds policy actions into the engine."""

    def __init__(self, exp: Experiment, policy: ExplorerPolicy, session: Session, step_cap: int):
        self.exp = exp
        self.policy = policy
        self.session = session
        self.step_cap = step_cap
        self.steps = 0

    @property
    def done(self) -> bool:
        return self.session.state is not SessionState.ACTIVE

    def step(self) -> None:
        if self.done:
            return
        if self.steps >= self.step_cap:
            self.exp.abandon(self.session)
            return
        self.steps += 1
        action = self.policy.next_action(session_view(self.exp, self.session))
        if action.kind == "move":
            self.exp.move(self.session, action.target)
        elif action.kind == "shoot":
            self.exp.take_shot(self.session, action.heading)
        elif action.kind == "discard":
            self.exp.discard_shot(self.session, action.index)
        elif action.kind == "submit":
            outcome = self.exp.submit(self.session)
            self.policy.observe_submit(outcome.status)
        elif action.kind == "abandon":
            self.exp.abandon(self.session)
        else:
            raise ValueError(f"unknown action {action.kind!r}")


def run_experiment(world: World, config: ExperimentConfig) -> ExperimentResult:
    """Drive workers through the engine until ``num_executions`` sessions
    finish (complete or escape), or the session budget runs out."""
    exp = Experiment(world, config.task, config.taboo)
    master = random.Random(config.seed)
    max_sessions = (
        config.max_sessions
        if config.max_sessions is not None
        else config.task.num_executions * 5
    )
    started = 0
    n_abandoned = 0
    finish_order: list[str] = []
    taboo_radius = config.taboo.taboo_radius_m if config.taboo else 10.0

    def new_driver() -> _Driver:
        nonlocal started
        started += 1
        start_seed = master.randrange(2**63)
        policy_seed = master.randrange(2**63)
        session = exp.start_session(f"w{started:04d}", start_seed)
        policy = ExplorerPolicy(config.policy, world, policy_seed, taboo_radius)
        return _Driver(exp, policy, session, config.step_cap)

    def note_finished(driver: _Driver) -> None:
        nonlocal n_abandoned
        if driver.session.state is SessionState.ABANDONED:
            n_abandoned += 1
        else:
            finish_order.append(driver.session.id)

    if config.schedule == "sequential":
        while not exp.closed and started < max_sessions:
            driver = new_driver()
            while not driver.done:
                driver.step()
            note_finished(driver)
    else:
        active: list[_Driver] = []
        while not exp.closed or active:
            while (
                not exp.closed
                and len(active) < config.interleave_k
                and started < max_sessions
            ):
                active.append(new_driver())
            if not active:
                break
            for driver in list(active):
                driver.step()
                if driver.done:
                    note_finished(driver)
                    active.remove(driver)
            if exp.closed:
                # sessions past the quota would finish after close; drop them
                for driver in active:
                    if not driver.done:
                        exp.abandon(driver.session)
                        n_abandoned += 1
                active.clear()

    clusters = consolidate(exp.detections, config.aggregation)
    pct, heatmap = coverage(world.graph, exp.visits)
    return ExperimentResult(
        config=config,
        experiment=exp,
        clusters=clusters,
        coverage_percent=pct,
        heatmap=heatmap,
        n_abandoned=n_abandoned,
        session_order=finish_order,
    )


def config_to_json(config: ExperimentConfig) -> dict:
    return {
        "task": vars(config.task) | {},
        "taboo": vars(config.taboo) | {} if config.taboo else None,
        "aggregation": vars(config.aggregation) | {},
        "policy": vars(config.policy) | {},
        "schedule": config.schedule,
        "interleave_k": config.interleave_k,
        "step_cap": config.step_cap,
        "max_sessions": config.max_sessions,
        "seed": config.seed,
    }


def write_bundle(result: ExperimentResult, world: World, outdir: str) -> None:
    """Archive one run: config copy, JSONL log, GeoJSON maps, CSV metrics.

    Output is byte-deterministic for a given config and seed (virtual
    clocks only, sorted keys, repr floats).
    """
    os.makedirs(outdir, exist_ok=True)
    exp = result.experiment

    with open(os.path.join(outdir, "config.json"), "w") as fh:
        json.dump(config_to_json(result.config), fh, sort_keys=True, indent=1)
        fh.write("\n")
    save_world(world, os.path.join(outdir, "world.geojson"))
    with open(os.path.join(outdir, "actions.jsonl"), "w") as fh:
        fh.write(exp.action_log_jsonl())
    with open(os.path.join(outdir, "detections.geojson"), "w") as fh:
        json.dump(exp.detections_geojson(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    with open(os.path.join(outdir, "confirmed.geojson"), "w") as fh:
        json.dump(clusters_geojson(result.clusters), fh, sort_keys=True, indent=1)
        fh.write("\n")

    lines = ["session_id,worker_id,state,n_detections,distance_m,duration_s"]
    for sid in sorted(exp.sessions):
        s = exp.sessions[sid]
        lines.append(
            f"{s.id},{s.worker_id},{s.state.value},{len(s.detections)},"
            f"{s.distance_walked_m!r},{s.clock - s.started_at!r}"
        )
    with open(os.path.join(outdir, "sessions.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")

    with open(os.path.join(outdir, "coverage.csv"), "w") as fh:
        fh.write(heatmap_csv(world, result.heatmap))

    metrics = [
        ("coverage_percent", repr(result.coverage_percent)),
        ("total_detections", str(result.total_detections)),
        ("confirmed_count", str(result.confirmed_count)),
        ("n_abandoned", str(result.n_abandoned)),
        ("finished_sessions", str(exp.finished_count)),
    ]
    with open(os.path.join(outdir, "metrics.csv"), "w") as fh:
        fh.write("metric,value\n")
        fh.writelines(f"{k},{v}\n" for k, v in metrics)
