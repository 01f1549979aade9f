"""Exploration task engine: the session state machine.

Handles movement with boundary enforcement, three-shot capture,
triangulation validation, duplicate/taboo rejection, the escape condition,
action logging and the taboo-registry lifecycle.

A session is owned by one logical actor; the experiment store and taboo
registry take serialized atomic updates (registry read at session start,
written at completion). Simulated sessions run on a per-session virtual
clock; live sessions pass wall-clock timestamps in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    ExperimentClosed,
    IllegalTarget,
    InvalidParams,
    NoSuchShot,
    SessionNotActive,
    TooManyShots,
    WrongShotCount,
)
from .geo import (
    GeoPoint,
    Heading,
    Ray,
    haversine_distance,
    project_local,
    ray_intersection,
    triangle_centroid_max_side_distance,
    unproject_local,
)
from .world import VisitCounter, World, random_start_point


@dataclass(frozen=True)
class TaskConfig:
    strategy: str = "basic"  # "basic" | "taboo"
    num_executions: int = 60
    num_instances: int = 5
    reward: float = 0.20
    delta_m: float = 10.0
    start_point_policy: str = "random"
    # virtual-clock costs per action, seconds
    move_cost_s: float = 4.0
    shot_cost_s: float = 3.0
    submit_cost_s: float = 2.0

    def __post_init__(self) -> None:
        if self.strategy not in ("basic", "taboo"):
            raise InvalidParams(f"unknown strategy {self.strategy!r}")
        if self.num_executions < 1:
            raise InvalidParams("num_executions must be >= 1")
        if self.num_instances < 1:
            raise InvalidParams("num_instances must be >= 1")
        if self.delta_m <= 0:
            raise InvalidParams("delta_m must be positive")


@dataclass(frozen=True)
class TabooConfig:
    taboo_threshold: int = 3
    escape_distance_m: float = 1800.0
    escape_time_s: float = 180.0
    taboo_radius_m: float = 10.0
    escape_mode: str = "and"  # "and" | "or"

    def __post_init__(self) -> None:
        if min(self.taboo_threshold, self.escape_distance_m, self.escape_time_s, self.taboo_radius_m) <= 0:
            raise InvalidParams("taboo parameters must be positive")
        if self.escape_mode not in ("and", "or"):
            raise InvalidParams(f"unknown escape_mode {self.escape_mode!r}")


class SessionState(str, Enum):
    ACTIVE = "active"
    COMPLETED = "completed"
    ESCAPED = "escaped"
    ABANDONED = "abandoned"


class ActionKind(str, Enum):
    MOVE = "move"
    BOUNDARY_REVERT = "boundary_revert"
    SHOT_TAKEN = "shot_taken"
    SHOT_DISCARDED = "shot_discarded"
    SUBMIT_OK = "submit_ok"
    SUBMIT_FAIL_TRIANGULATION = "submit_fail_triangulation"
    SUBMIT_FAIL_DUPLICATE = "submit_fail_duplicate"
    SUBMIT_FAIL_TABOO = "submit_fail_taboo"
    ESCAPE = "escape"
    COMPLETE = "complete"
    ABANDON = "abandon"


@dataclass(frozen=True)
class Shot:
    position: GeoPoint
    heading: Heading
    node_id: str
    timestamp: float


@dataclass(frozen=True)
class Detection:
    id: str
    worker_id: str
    session_id: str
    shots: tuple[Shot, Shot, Shot]
    centroid: GeoPoint
    dmax: float
    timestamp: float


@dataclass(frozen=True)
class ActionLogEntry:
    session_id: str
    t: float
    kind: ActionKind
    payload: dict

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "t": self.t,
            "kind": self.kind.value,
            "payload": self.payload,
        }


class MoveResult(str, Enum):
    MOVED = "moved"
    REVERTED = "reverted"


@dataclass(frozen=True)
class MoveOutcome:
    result: MoveResult
    node_id: str
    escaped: bool = False


class SubmitStatus(str, Enum):
    ACCEPTED = "accepted"
    REJECTED_TRIANGULATION = "rejected_triangulation"
    REJECTED_DUPLICATE = "rejected_duplicate"
    REJECTED_TABOO = "rejected_taboo"


@dataclass(frozen=True)
class SubmitOutcome:
    status: SubmitStatus
    detection: Detection | None = None
    reason: str | None = None  # "no_intersection" | "too_spread"
    session_state: SessionState = SessionState.ACTIVE


@dataclass
class Session:
    id: str
    worker_id: str
    state: SessionState
    current_node: str
    last_in_area_node: str
    started_at: float
    taboo_snapshot: list[GeoPoint] = field(default_factory=list)
    pending_shots: list[Shot] = field(default_factory=list)
    detections: list[Detection] = field(default_factory=list)
    distance_walked_m: float = 0.0
    last_detection_at: float = 0.0
    clock: float = 0.0
    log: list[ActionLogEntry] = field(default_factory=list)
    last_touched: float = 0.0


@dataclass
class CandidateCluster:
    id: int
    centroid: GeoPoint
    member_ids: list[str]
    workers: set[str]
    taboo: bool = False


class TabooRegistry:
    """Candidate clusters of detections; a cluster becomes taboo once it has
    detections from ``threshold`` distinct workers. Updated only when a
    session finishes (completes or escapes); active sessions see the snapshot
    taken at their start."""

    def __init__(self, radius_m: float = 10.0, threshold: int = 3):
        self.radius_m = radius_m
        self.threshold = threshold
        self.clusters: list[CandidateCluster] = []

    def add_detection(self, det: Detection) -> None:
        best: CandidateCluster | None = None
        best_d = self.radius_m
        for cluster in self.clusters:  # scan order = cluster id order, so ties pick the smallest id
            d = haversine_distance(cluster.centroid, det.centroid)
            if d < best_d or (best is not None and d == best_d and cluster.id < best.id):
                best, best_d = cluster, d
        if best is None:
            self.clusters.append(
                CandidateCluster(
                    id=len(self.clusters),
                    centroid=det.centroid,
                    member_ids=[det.id],
                    workers={det.worker_id},
                )
            )
            cluster = self.clusters[-1]
        else:
            n = len(best.member_ids)
            best.centroid = GeoPoint(
                (best.centroid.lat * n + det.centroid.lat) / (n + 1),
                (best.centroid.lon * n + det.centroid.lon) / (n + 1),
            )
            best.member_ids.append(det.id)
            best.workers.add(det.worker_id)
            cluster = best
        if len(cluster.workers) >= self.threshold:
            cluster.taboo = True  # monotone: never reset

    def taboo_positions(self) -> list[GeoPoint]:
        return [c.centroid for c in self.clusters if c.taboo]

    def snapshot(self) -> dict:
        return {
            "radius_m": self.radius_m,
            "threshold": self.threshold,
            "clusters": [
                {
                    "id": c.id,
                    "centroid": [c.centroid.lon, c.centroid.lat],
                    "member_ids": c.member_ids,
                    "workers": sorted(c.workers),
                    "taboo": c.taboo,
                }
                for c in self.clusters
            ],
        }

    @classmethod
    def from_snapshot(cls, doc: dict) -> "TabooRegistry":
        reg = cls(doc["radius_m"], doc["threshold"])
        for c in doc["clusters"]:
            reg.clusters.append(
                CandidateCluster(
                    id=c["id"],
                    centroid=GeoPoint(c["centroid"][1], c["centroid"][0]),
                    member_ids=list(c["member_ids"]),
                    workers=set(c["workers"]),
                    taboo=c["taboo"],
                )
            )
        return reg


class Experiment:
    """One experiment: sessions, finished-session store, taboo registry.

    Action logs and detections of a session only reach the persistent store
    when the session completes or escapes; abandoning purges them entirely.
    """

    def __init__(
        self,
        world: World,
        config: TaskConfig,
        taboo_config: TabooConfig | None = None,
    ):
        if config.strategy == "taboo" and taboo_config is None:
            taboo_config = TabooConfig()
        self.world = world
        self.config = config
        self.taboo_config = taboo_config
        radius = taboo_config.taboo_radius_m if taboo_config else 10.0
        threshold = taboo_config.taboo_threshold if taboo_config else 3
        self.registry = TabooRegistry(radius_m=radius, threshold=threshold)
        self.visits = VisitCounter(set(world.graph.nodes))
        self.sessions: dict[str, Session] = {}
        self.archived_log: list[ActionLogEntry] = []
        self.detections: list[Detection] = []
        self.finished_count = 0  # completed or escaped
        self._session_seq = 0
        self._detection_seq = 0
        self._in_area: dict[str, bool] = {}  # node positions are immutable

    # -- helpers ------------------------------------------------------------

    @property
    def closed(self) -> bool:
        return self.finished_count >= self.config.num_executions

    def _require_active(self, session: Session) -> None:
        if session.state is not SessionState.ACTIVE:
            raise SessionNotActive(f"session {session.id} is {session.state.value}")

    def _log(self, session: Session, kind: ActionKind, payload: dict) -> None:
        session.log.append(ActionLogEntry(session.id, session.clock, kind, payload))

    def _tick(self, session: Session, cost: float, now: float | None) -> None:
        """Advance the session clock: virtual cost if no wall time given."""
        session.clock = session.clock + cost if now is None else max(now, session.clock)
        session.last_touched = session.clock

    def _duplicate_radius(self) -> float:
        return self.taboo_config.taboo_radius_m if self.taboo_config else 10.0

    def _worker_prior_centroids(self, session: Session) -> list[GeoPoint]:
        prior = [d.centroid for d in session.detections]
        prior.extend(d.centroid for d in self.detections if d.worker_id == session.worker_id)
        return prior

    def _finish(self, session: Session, state: SessionState) -> None:
        session.state = state
        self.archived_log.extend(session.log)
        self.detections.extend(session.detections)
        for det in session.detections:
            self.registry.add_detection(det)  # update-on-completion semantics
        self.finished_count += 1

    # -- operations ---------------------------------------------------------

    def start_session(
        self, worker_id: str, rng_seed: int, now: float | None = None
    ) -> Session:
        if self.closed:
            raise ExperimentClosed(
                f"experiment already has {self.config.num_executions} finished executions"
            )
        start = random_start_point(self.world.graph, rng_seed)
        self._session_seq += 1
        t0 = now if now is not None else 0.0
        snapshot = (
            list(self.registry.taboo_positions()) if self.config.strategy == "taboo" else []
        )
        session = Session(
            id=f"s{self._session_seq:04d}",
            worker_id=worker_id,
            state=SessionState.ACTIVE,
            current_node=start,
            last_in_area_node=start,
            started_at=t0,
            last_detection_at=t0,
            clock=t0,
            taboo_snapshot=snapshot,
            last_touched=t0,
        )
        self.sessions[session.id] = session
        self.visits.record(start)
        self._log(session, ActionKind.MOVE, {"node": start, "initial": True})
        return session

    def move(self, session: Session, target_node_id: str, now: float | None = None) -> MoveOutcome:
        self._require_active(session)
        current = self.world.graph.node(session.current_node)
        target = self.world.graph.node(target_node_id)
        if target_node_id not in current.neighbors and target_node_id not in current.visible_nodes:
            raise IllegalTarget(
                f"{target_node_id} is neither adjacent to nor visible from {session.current_node}"
            )
        self._tick(session, self.config.move_cost_s, now)
        in_area = self._in_area.get(target_node_id)
        if in_area is None:
            in_area = self.world.aoi.contains(target.position)
            self._in_area[target_node_id] = in_area
        if in_area:
            step = haversine_distance(current.position, target.position)
            session.distance_walked_m += step
            session.current_node = target_node_id
            session.last_in_area_node = target_node_id
            self.visits.record(target_node_id)
            self._log(session, ActionKind.MOVE, {"node": target_node_id, "step_m": step})
            result = MoveResult.MOVED
        else:
            session.current_node = session.last_in_area_node
            self._log(
                session,
                ActionKind.BOUNDARY_REVERT,
                {
                    "attempted": target_node_id,
                    "restored": session.last_in_area_node,
                    "explanation": "outside_area_of_interest",
                },
            )
            result = MoveResult.REVERTED
        escaped = self._check_escape(session)
        return MoveOutcome(result=result, node_id=session.current_node, escaped=escaped)

    def take_shot(self, session: Session, heading: Heading, now: float | None = None) -> list[Shot]:
        self._require_active(session)
        if len(session.pending_shots) >= 3:
            raise TooManyShots("a submission holds exactly 3 shots")
        self._tick(session, self.config.shot_cost_s, now)
        node = self.world.graph.node(session.current_node)
        shot = Shot(
            position=node.position,
            heading=heading,
            node_id=node.id,
            timestamp=session.clock,
        )
        session.pending_shots.append(shot)
        self._log(
            session,
            ActionKind.SHOT_TAKEN,
            {"node": node.id, "heading_deg": heading.degrees},
        )
        self._check_escape(session)
        return list(session.pending_shots)

    def discard_shot(self, session: Session, index: int, now: float | None = None) -> list[Shot]:
        self._require_active(session)
        if not 0 <= index < len(session.pending_shots):
            raise NoSuchShot(f"no pending shot at index {index}")
        self._tick(session, 0.0, now)
        removed = session.pending_shots.pop(index)
        self._log(
            session,
            ActionKind.SHOT_DISCARDED,
            {"index": index, "node": removed.node_id},
        )
        self._check_escape(session)
        return list(session.pending_shots)

    def submit(self, session: Session, now: float | None = None) -> SubmitOutcome:
        self._require_active(session)
        if len(session.pending_shots) != 3:
            raise WrongShotCount(f"submit requires 3 shots, have {len(session.pending_shots)}")
        self._tick(session, self.config.submit_cost_s, now)
        shots = tuple(session.pending_shots)

        # validation frame: local projection centered on the mean shot position
        frame = GeoPoint(
            sum(s.position.lat for s in shots) / 3.0,
            sum(s.position.lon for s in shots) / 3.0,
        )
        rays = [Ray.from_heading(project_local(frame, s.position), s.heading) for s in shots]
        vertices = [
            ray_intersection(rays[0], rays[1]),
            ray_intersection(rays[0], rays[2]),
            ray_intersection(rays[1], rays[2]),
        ]
        if any(v is None for v in vertices):
            self._log(session, ActionKind.SUBMIT_FAIL_TRIANGULATION, {"reason": "no_intersection"})
            self._check_escape(session)
            return SubmitOutcome(
                SubmitStatus.REJECTED_TRIANGULATION,
                reason="no_intersection",
                session_state=session.state,
            )
        centroid_local, dmax = triangle_centroid_max_side_distance(*vertices)
        if dmax >= self.config.delta_m:
            self._log(
                session,
                ActionKind.SUBMIT_FAIL_TRIANGULATION,
                {"reason": "too_spread", "dmax_m": dmax},
            )
            self._check_escape(session)
            return SubmitOutcome(
                SubmitStatus.REJECTED_TRIANGULATION,
                reason="too_spread",
                session_state=session.state,
            )
        centroid = unproject_local(frame, centroid_local)

        radius = self._duplicate_radius()
        if any(
            haversine_distance(centroid, prior) < radius
            for prior in self._worker_prior_centroids(session)
        ):
            self._log(session, ActionKind.SUBMIT_FAIL_DUPLICATE, {})
            self._check_escape(session)
            return SubmitOutcome(SubmitStatus.REJECTED_DUPLICATE, session_state=session.state)

        if self.config.strategy == "taboo" and any(
            haversine_distance(centroid, taboo) < radius for taboo in session.taboo_snapshot
        ):
            self._log(session, ActionKind.SUBMIT_FAIL_TABOO, {})
            self._check_escape(session)
            return SubmitOutcome(SubmitStatus.REJECTED_TABOO, session_state=session.state)

        self._detection_seq += 1
        detection = Detection(
            id=f"d{self._detection_seq:05d}",
            worker_id=session.worker_id,
            session_id=session.id,
            shots=shots,  # type: ignore[arg-type]
            centroid=centroid,
            dmax=dmax,
            timestamp=session.clock,
        )
        session.detections.append(detection)
        session.pending_shots.clear()
        session.last_detection_at = session.clock
        self._log(
            session,
            ActionKind.SUBMIT_OK,
            {
                "detection_id": detection.id,
                "centroid": [centroid.lon, centroid.lat],
                "dmax_m": dmax,
            },
        )
        if len(session.detections) == self.config.num_instances:
            self._log(session, ActionKind.COMPLETE, {"reward": self.config.reward})
            self._finish(session, SessionState.COMPLETED)
        return SubmitOutcome(
            SubmitStatus.ACCEPTED, detection=detection, session_state=session.state
        )

    def _check_escape(self, session: Session) -> bool:
        """Escape check, run automatically after every action."""
        if (
            self.config.strategy != "taboo"
            or self.taboo_config is None
            or session.state is not SessionState.ACTIVE
        ):
            return False
        tc = self.taboo_config
        dist_ok = session.distance_walked_m >= tc.escape_distance_m
        time_ok = session.clock - session.last_detection_at >= tc.escape_time_s
        met = (dist_ok and time_ok) if tc.escape_mode == "and" else (dist_ok or time_ok)
        if not met:
            return False
        self._log(
            session,
            ActionKind.ESCAPE,
            {
                "distance_walked_m": session.distance_walked_m,
                "time_since_last_detection_s": session.clock - session.last_detection_at,
                "n_detections": len(session.detections),
                "reward": self.config.reward,  # full reward on escape
            },
        )
        self._finish(session, SessionState.ESCAPED)
        return True

    def abandon(self, session: Session, now: float | None = None) -> None:
        """Purge: the action log and detections never reach the store."""
        self._require_active(session)
        session.state = SessionState.ABANDONED
        session.log.clear()
        session.detections.clear()
        session.pending_shots.clear()
        del self.sessions[session.id]

    # -- exports ------------------------------------------------------------

    def action_log_jsonl(self) -> str:
        return "".join(
            json.dumps(e.to_json(), sort_keys=True) + "\n" for e in self.archived_log
        )

    def detections_geojson(self) -> dict:
        return {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "Point",
                        "coordinates": [d.centroid.lon, d.centroid.lat],
                    },
                    "properties": {
                        "id": d.id,
                        "worker_id": d.worker_id,
                        "session_id": d.session_id,
                        "dmax_m": d.dmax,
                        "t": d.timestamp,
                    },
                }
                for d in self.detections
            ],
        }
