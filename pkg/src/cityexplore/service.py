"""HTTP API over the exploration engine, with file persistence.

Exposes task configuration, live sessions and the consolidated map. The
transport adds nothing: every endpoint delegates to the engine, so a
transcript replayed through the library yields identical final state.

Persistence is append-only JSONL for finished-session logs plus an atomic
(write-temp-then-rename) snapshot of the taboo registry and detections.
A session's log is only committed when it finishes, matching the engine's
abandon-purge rule; crash recovery therefore keeps every finished session
and loses only sessions still in flight.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .aggregate import AggregationParams, clusters_geojson, consolidate
from .engine import (
    Detection,
    Experiment,
    Session,
    SessionState,
    Shot,
    TabooConfig,
    TaskConfig,
)
from .errors import (
    CityExploreError,
    DataError,
    ExperimentClosed,
    IllegalTarget,
    NoSuchShot,
    SessionNotActive,
    TooManyShots,
    UnknownNode,
    WrongShotCount,
)
from .geo import GeoPoint, Heading, haversine_distance, local_bearing, project_local
from .world import World, world_from_geojson, world_to_geojson

DEFAULT_SESSION_EXPIRY_S = 30 * 60.0


class TaskDescriptor:
    def __init__(
        self,
        task_id: str,
        world: World,
        config: TaskConfig,
        taboo_config: TabooConfig | None,
        instructions: str,
        allow_repeat: bool = False,
    ):
        self.id = task_id
        self.world = world
        self.experiment = Experiment(world, config, taboo_config)
        self.instructions = instructions
        self.allow_repeat = allow_repeat
        self.manually_closed = False
        self.worker_history: set[str] = set()
        self._log_watermark = 0

    @property
    def status(self) -> str:
        return "closed" if self.manually_closed or self.experiment.closed else "open"

    def to_json(self) -> dict:
        return {
            "task_id": self.id,
            "status": self.status,
            "completed_executions": self.experiment.finished_count,
            "num_executions": self.experiment.config.num_executions,
            "strategy": self.experiment.config.strategy,
            "instructions": self.instructions,
            "allow_repeat": self.allow_repeat,
        }


def _atomic_write(path: str, content: str) -> None:
    tmp = f"{path}.tmp.{uuid.uuid4().hex}"
    with open(tmp, "w") as fh:
        fh.write(content)
    os.replace(tmp, path)


class Store:
    """All live tasks and the on-disk layout under ``data_dir``."""

    def __init__(self, data_dir: str | None = None):
        self.data_dir = data_dir
        self.tasks: dict[str, TaskDescriptor] = {}
        self.sessions: dict[str, tuple[TaskDescriptor, Session]] = {}
        self.lock = threading.Lock()
        if data_dir:
            os.makedirs(os.path.join(data_dir, "tasks"), exist_ok=True)
            self._load()

    # -- persistence ----------------------------------------------------------

    def _task_dir(self, task_id: str) -> str:
        return os.path.join(self.data_dir, "tasks", task_id)

    def persist_task(self, task: TaskDescriptor) -> None:
        if not self.data_dir:
            return
        tdir = self._task_dir(task.id)
        os.makedirs(tdir, exist_ok=True)
        meta = {
            "task_id": task.id,
            "instructions": task.instructions,
            "allow_repeat": task.allow_repeat,
            "manually_closed": task.manually_closed,
            "worker_history": sorted(task.worker_history),
            "config": vars(task.experiment.config),
            "taboo": vars(task.experiment.taboo_config)
            if task.experiment.taboo_config
            else None,
        }
        _atomic_write(os.path.join(tdir, "task.json"), json.dumps(meta, sort_keys=True))
        world_path = os.path.join(tdir, "world.geojson")
        if not os.path.exists(world_path):
            _atomic_write(world_path, json.dumps(world_to_geojson(task.world), sort_keys=True))

    def commit(self, task: TaskDescriptor) -> None:
        """Append newly archived log entries; snapshot registry + detections."""
        if not self.data_dir:
            return
        exp = task.experiment
        new = exp.archived_log[task._log_watermark :]
        if new:
            with open(os.path.join(self._task_dir(task.id), "actions.jsonl"), "a") as fh:
                fh.writelines(json.dumps(e.to_json(), sort_keys=True) + "\n" for e in new)
            task._log_watermark = len(exp.archived_log)
        _atomic_write(
            os.path.join(self._task_dir(task.id), "registry.json"),
            json.dumps(exp.registry.snapshot(), sort_keys=True),
        )
        _atomic_write(
            os.path.join(self._task_dir(task.id), "detections.jsonl"),
            "".join(json.dumps(_detection_json(d), sort_keys=True) + "\n" for d in exp.detections),
        )
        self.persist_task(task)

    def _load(self) -> None:
        root = os.path.join(self.data_dir, "tasks")
        for task_id in sorted(os.listdir(root)):
            tdir = os.path.join(root, task_id)
            meta_path = os.path.join(tdir, "task.json")
            if not os.path.isfile(meta_path):
                continue
            with open(meta_path) as fh:
                meta = json.load(fh)
            with open(os.path.join(tdir, "world.geojson")) as fh:
                world = world_from_geojson(json.load(fh))
            config = TaskConfig(**meta["config"])
            taboo = TabooConfig(**meta["taboo"]) if meta["taboo"] else None
            task = TaskDescriptor(
                task_id,
                world,
                config,
                taboo,
                meta["instructions"],
                meta["allow_repeat"],
            )
            task.manually_closed = meta["manually_closed"]
            task.worker_history = set(meta["worker_history"])
            exp = task.experiment
            reg_path = os.path.join(tdir, "registry.json")
            if os.path.isfile(reg_path):
                from .engine import TabooRegistry

                with open(reg_path) as fh:
                    exp.registry = TabooRegistry.from_snapshot(json.load(fh))
            det_path = os.path.join(tdir, "detections.jsonl")
            if os.path.isfile(det_path):
                with open(det_path) as fh:
                    exp.detections = [_detection_from_json(json.loads(line)) for line in fh]
                exp._detection_seq = len(exp.detections)
            log_path = os.path.join(tdir, "actions.jsonl")
            if os.path.isfile(log_path):
                finished = 0
                max_seq = 0
                with open(log_path) as fh:
                    for line in fh:
                        e = json.loads(line)
                        if e["kind"] in ("complete", "escape"):
                            finished += 1
                        sid = e["session_id"]
                        if sid.startswith("s"):
                            max_seq = max(max_seq, int(sid[1:]))
                        if e["kind"] == "move":
                            node = e["payload"].get("node")
                            if node in world.graph.nodes:
                                exp.visits.record(node)
                exp.finished_count = finished
                exp._session_seq = max_seq
                task._log_watermark = 0
                # watermark counts in-memory archived entries; none after restart,
                # but the file already holds history, so align the watermark
                task._log_watermark = len(exp.archived_log)
            self.tasks[task_id] = task


def _detection_json(d: Detection) -> dict:
    return {
        "id": d.id,
        "worker_id": d.worker_id,
        "session_id": d.session_id,
        "centroid": [d.centroid.lon, d.centroid.lat],
        "dmax_m": d.dmax,
        "t": d.timestamp,
        "shots": [
            {
                "position": [s.position.lon, s.position.lat],
                "heading_deg": s.heading.degrees,
                "node_id": s.node_id,
                "t": s.timestamp,
            }
            for s in d.shots
        ],
    }


def _detection_from_json(doc: dict) -> Detection:
    shots = tuple(
        Shot(
            position=GeoPoint(s["position"][1], s["position"][0]),
            heading=Heading(s["heading_deg"]),
            node_id=s["node_id"],
            timestamp=s["t"],
        )
        for s in doc["shots"]
    )
    return Detection(
        id=doc["id"],
        worker_id=doc["worker_id"],
        session_id=doc["session_id"],
        shots=shots,  # type: ignore[arg-type]
        centroid=GeoPoint(doc["centroid"][1], doc["centroid"][0]),
        dmax=doc["dmax_m"],
        timestamp=doc["t"],
    )


_STATUS_BY_ERROR = {
    UnknownNode: 404,
    ExperimentClosed: 409,
    SessionNotActive: 409,
    IllegalTarget: 409,
    TooManyShots: 409,
    NoSuchShot: 409,
    WrongShotCount: 409,
    DataError: 422,
}


def create_app(
    store: Store | None = None,
    session_expiry_s: float = DEFAULT_SESSION_EXPIRY_S,
    clock=time.time,
) -> FastAPI:
    app = FastAPI(title="cityexplore")
    store = store if store is not None else Store()
    app.state.store = store

    @app.exception_handler(CityExploreError)
    async def _engine_error(_request: Request, exc: CityExploreError):
        status = 422
        for klass, code in _STATUS_BY_ERROR.items():
            if isinstance(exc, klass):
                status = code
                break
        return JSONResponse(status_code=status, content={"error": exc.code, "detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(_request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"error": "invalid_params", "detail": str(exc)})

    def get_task(task_id: str) -> TaskDescriptor:
        task = store.tasks.get(task_id)
        if task is None:
            raise UnknownNode(f"no task {task_id}")
        return task

    def get_session(session_id: str) -> tuple[TaskDescriptor, Session]:
        entry = store.sessions.get(session_id)
        if entry is None:
            raise UnknownNode(f"no session {session_id}")
        task, session = entry
        if (
            session.state is SessionState.ACTIVE
            and clock() - session.last_touched > session_expiry_s
        ):
            task.experiment.abandon(session)
            store.sessions.pop(session_id, None)
            raise UnknownNode(f"session {session_id} expired and was abandoned")
        return task, session

    def session_json(session: Session) -> dict:
        return {
            "session_id": session.id,
            "worker_id": session.worker_id,
            "state": session.state.value,
            "current_node": session.current_node,
            "pending_shots": len(session.pending_shots),
            "n_detections": len(session.detections),
            "distance_walked_m": session.distance_walked_m,
        }

    @app.post("/tasks", status_code=201)
    async def create_task(body: dict):
        with store.lock:
            try:
                world = world_from_geojson(body["world"])
                config = TaskConfig(**body.get("config", {}))
                taboo = TabooConfig(**body["taboo"]) if body.get("taboo") else None
            except (KeyError, TypeError) as exc:
                raise DataError(f"bad task body: {exc}") from exc
            task_id = body.get("task_id") or uuid.uuid4().hex[:12]
            if task_id in store.tasks:
                raise DataError(f"task {task_id} already exists")
            task = TaskDescriptor(
                task_id,
                world,
                config,
                taboo,
                instructions=body.get("instructions", ""),
                allow_repeat=bool(body.get("allow_repeat", False)),
            )
            store.tasks[task_id] = task
            store.persist_task(task)
            return task.to_json()

    @app.get("/tasks/{task_id}")
    async def read_task(task_id: str):
        return get_task(task_id).to_json()

    @app.post("/tasks/{task_id}/close")
    async def close_task(task_id: str):
        with store.lock:
            task = get_task(task_id)
            task.manually_closed = True
            store.persist_task(task)
            return task.to_json()

    @app.post("/tasks/{task_id}/sessions", status_code=201)
    async def start_session(task_id: str, body: dict):
        with store.lock:
            task = get_task(task_id)
            if task.manually_closed:
                raise ExperimentClosed(f"task {task_id} is closed")
            worker_id = body.get("worker_id", "anonymous")
            if not task.allow_repeat and worker_id in task.worker_history:
                raise ExperimentClosed(f"worker {worker_id} already took task {task_id}")
            seed = int(body.get("seed", 0))
            session = task.experiment.start_session(worker_id, seed, now=clock())
            task.worker_history.add(worker_id)
            key = f"{task_id}-{session.id}"
            store.sessions[key] = (task, session)
            node = task.world.graph.node(session.current_node)
            store.persist_task(task)
            return {
                "session_id": key,
                "start_node": {
                    "id": node.id,
                    "lat": node.position.lat,
                    "lon": node.position.lon,
                },
                "instructions": task.instructions,
                "taboo_markers": [
                    {"lat": p.lat, "lon": p.lon} for p in session.taboo_snapshot
                ],
            }

    @app.get("/sessions/{session_id}")
    async def read_session(session_id: str):
        _task, session = get_session(session_id)
        return session_json(session)

    @app.post("/sessions/{session_id}/move")
    async def move(session_id: str, body: dict):
        with store.lock:
            task, session = get_session(session_id)
            target = body.get("target")
            if not isinstance(target, str):
                raise DataError("move body needs a 'target' node id")
            outcome = task.experiment.move(session, target, now=clock())
            store.commit(task)
            return {
                "outcome": outcome.result.value,
                "node": outcome.node_id,
                "escaped": outcome.escaped,
                "explanation": "outside_area_of_interest"
                if outcome.result.value == "reverted"
                else None,
                "session": session_json(session),
            }

    @app.post("/sessions/{session_id}/shots")
    async def take_shot(session_id: str, body: dict):
        with store.lock:
            task, session = get_session(session_id)
            heading = Heading(float(body.get("heading", 0.0)))
            shots = task.experiment.take_shot(session, heading, now=clock())
            store.commit(task)
            return {
                "pending": [
                    {"node_id": s.node_id, "heading_deg": s.heading.degrees} for s in shots
                ],
                "session": session_json(session),
            }

    @app.delete("/sessions/{session_id}/shots/{index}")
    async def discard_shot(session_id: str, index: int):
        with store.lock:
            task, session = get_session(session_id)
            shots = task.experiment.discard_shot(session, index, now=clock())
            return {
                "pending": [
                    {"node_id": s.node_id, "heading_deg": s.heading.degrees} for s in shots
                ],
                "session": session_json(session),
            }

    @app.post("/sessions/{session_id}/submit")
    async def submit(session_id: str, body: dict | None = None):
        with store.lock:
            task, session = get_session(session_id)
            outcome = task.experiment.submit(session, now=clock())
            store.commit(task)
            resp = {
                "status": outcome.status.value,
                "reason": outcome.reason,
                "session": session_json(session),
            }
            if outcome.detection:
                d = outcome.detection
                resp["detection"] = {
                    "id": d.id,
                    "centroid": {"lat": d.centroid.lat, "lon": d.centroid.lon},
                    "dmax_m": d.dmax,
                }
            return resp

    @app.post("/sessions/{session_id}/abandon")
    async def abandon(session_id: str):
        with store.lock:
            task, session = get_session(session_id)
            task.experiment.abandon(session)
            store.sessions.pop(session_id, None)
            return {"state": session.state.value}

    @app.get("/sessions/{session_id}/view")
    async def view(session_id: str):
        task, session = get_session(session_id)
        world = task.world
        node = world.graph.node(session.current_node)
        frame = node.position
        local_here = project_local(frame, node.position)
        taboo_radius = (
            task.experiment.taboo_config.taboo_radius_m
            if task.experiment.taboo_config
            else 10.0
        )

        def node_info(nid: str) -> dict:
            p = world.graph.node(nid).position
            return {
                "id": nid,
                "lat": p.lat,
                "lon": p.lon,
                "bearing_deg": local_bearing(local_here, project_local(frame, p)).degrees,
                "distance_m": haversine_distance(node.position, p),
            }

        pois = []
        for poi in world.pois:
            if session.current_node not in poi.visible_from:
                continue
            d = haversine_distance(node.position, poi.position)
            taboo = any(
                haversine_distance(poi.position, t) < taboo_radius
                for t in session.taboo_snapshot
            )
            pois.append(
                {
                    "id": poi.id,
                    "bearing_deg": local_bearing(
                        local_here, project_local(frame, poi.position)
                    ).degrees,
                    "distance_m": d,
                    "taboo": taboo,
                }
            )
        return {
            "session": session_json(session),
            "node": {"id": node.id, "lat": node.position.lat, "lon": node.position.lon},
            "neighbors": [node_info(n) for n in sorted(node.neighbors)],
            "visible_nodes": [node_info(n) for n in sorted(node.visible_nodes)],
            "pois": pois,
            "boundary": [
                {"lat": p.lat, "lon": p.lon} for p in world.aoi.boundary
            ],
        }

    @app.get("/tasks/{task_id}/map")
    async def consolidated_map(task_id: str, eps_m: float = 10.0, min_pts: int = 3):
        task = get_task(task_id)
        clusters = consolidate(
            task.experiment.detections, AggregationParams(eps_m=eps_m, min_pts=min_pts)
        )
        return clusters_geojson(clusters)

    return app
