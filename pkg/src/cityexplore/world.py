"""The explorable world: panorama graph, area of interest, ground-truth PoIs.

Includes a deterministic synthetic-world generator (grid street networks),
coverage accounting, and GeoJSON / CSV import-export.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

from .errors import DataError, EmptyGraph, InvalidParams, UnknownNode
from .geo import (
    GeoPoint,
    LocalPoint,
    haversine_distance,
    point_in_polygon,
    project_local,
    unproject_local,
)

DEFAULT_ORIGIN = GeoPoint(46.07, 11.12)


@dataclass(frozen=True)
class AreaOfInterest:
    """Closed polygon bounding the explorable area."""

    boundary: tuple[GeoPoint, ...]
    name: str = "area"

    def contains(self, p: GeoPoint) -> bool:
        return point_in_polygon(list(self.boundary), p)


@dataclass(frozen=True)
class PanoNode:
    """One panorama point: where a worker can stand.

    ``neighbors`` are directly linked nodes (arrow moves); ``visible_nodes``
    are nodes within line-of-sight jump range (double-click fast-forward).
    """

    id: str
    position: GeoPoint
    neighbors: frozenset[str] = frozenset()
    visible_nodes: frozenset[str] = frozenset()


class ExplorableGraph:
    """Panorama-node graph with edge lengths in meters."""

    def __init__(self, nodes: list[PanoNode], edges: list[tuple[str, str]]):
        self.nodes: dict[str, PanoNode] = {n.id: n for n in nodes}
        if len(self.nodes) != len(nodes):
            raise InvalidParams("duplicate node ids")
        self.edges: list[tuple[str, str, float]] = []
        for a, b in edges:
            if a == b:
                raise InvalidParams("self-loop edge")
            if a not in self.nodes or b not in self.nodes:
                raise UnknownNode(f"edge endpoint {a if a not in self.nodes else b}")
            length = haversine_distance(self.nodes[a].position, self.nodes[b].position)
            self.edges.append((a, b, length))

    def node(self, node_id: str) -> PanoNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class GroundTruthPoI:
    id: str
    position: GeoPoint
    visible_from: frozenset[str] = frozenset()


class VisitCounter:
    """Per-node visit counts: one count per session start or move landing."""

    def __init__(self, node_ids: set[str] | None = None):
        self._known = set(node_ids) if node_ids is not None else None
        self.counts: dict[str, int] = {}

    def record(self, node_id: str) -> None:
        if self._known is not None and node_id not in self._known:
            raise UnknownNode(node_id)
        self.counts[node_id] = self.counts.get(node_id, 0) + 1

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class World:
    """Bundle of everything a task runs against."""

    graph: ExplorableGraph
    aoi: AreaOfInterest
    pois: list[GroundTruthPoI] = field(default_factory=list)
    origin: GeoPoint = DEFAULT_ORIGIN


@dataclass(frozen=True)
class WorldParams:
    grid_rows: int = 5
    grid_cols: int = 5
    spacing_m: float = 40.0
    n_pois: int = 10
    sight_radius_m: float = 25.0
    seed: int = 0
    origin: GeoPoint = DEFAULT_ORIGIN
    margin_m: float = 10.0
    visible_range_m: float = 150.0
    poi_offset_min_m: float = 2.0
    poi_offset_max_m: float = 8.0
    poi_min_gap_m: float = 0.0  # 0 disables the separation constraint


def explorable_distance(g: ExplorableGraph) -> float:
    """Total edge length in meters."""
    return sum(length for _, _, length in g.edges)


def random_start_point(g: ExplorableGraph, rng_seed: int) -> str:
    """Uniform over street nodes, deterministic given the seed."""
    if not g.nodes:
        raise EmptyGraph("cannot pick a start point in an empty graph")
    ids = sorted(g.nodes)
    return random.Random(rng_seed).choice(ids)


def generate_synthetic_world(params: WorldParams) -> World:
    """Deterministic grid street network with randomly placed PoIs.

    Nodes sit every ``spacing_m`` along streets; the AOI is the bounding
    rectangle with a small margin; PoIs are offset 2-8 m (configurable)
    from a street node, with ``visible_from`` precomputed by sight radius.
    """
    if params.grid_rows < 2 or params.grid_cols < 2:
        raise InvalidParams("grid needs at least 2 rows and 2 columns")
    if params.spacing_m <= 0:
        raise InvalidParams("spacing must be positive")
    if params.n_pois < 0:
        raise InvalidParams("n_pois must be non-negative")

    origin = params.origin
    local: dict[str, LocalPoint] = {}
    for r in range(params.grid_rows):
        for c in range(params.grid_cols):
            local[f"n{r}_{c}"] = LocalPoint(c * params.spacing_m, r * params.spacing_m)

    edges: list[tuple[str, str]] = []
    for r in range(params.grid_rows):
        for c in range(params.grid_cols):
            if c + 1 < params.grid_cols:
                edges.append((f"n{r}_{c}", f"n{r}_{c + 1}"))
            if r + 1 < params.grid_rows:
                edges.append((f"n{r}_{c}", f"n{r + 1}_{c}"))

    neighbors: dict[str, set[str]] = {nid: set() for nid in local}
    for a, b in edges:
        neighbors[a].add(b)
        neighbors[b].add(a)

    # fast-forward targets: nodes on the same street line within visible range
    visible: dict[str, set[str]] = {nid: set() for nid in local}
    for nid, p in local.items():
        for other, q in local.items():
            if other == nid:
                continue
            same_street = abs(p.x - q.x) < 1e-9 or abs(p.y - q.y) < 1e-9
            if same_street and math.hypot(p.x - q.x, p.y - q.y) <= params.visible_range_m:
                visible[nid].add(other)

    nodes = [
        PanoNode(
            id=nid,
            position=unproject_local(origin, p),
            neighbors=frozenset(neighbors[nid]),
            visible_nodes=frozenset(visible[nid]),
        )
        for nid, p in local.items()
    ]
    graph = ExplorableGraph(nodes, edges)

    width = (params.grid_cols - 1) * params.spacing_m
    height = (params.grid_rows - 1) * params.spacing_m
    m = params.margin_m
    ring_local = [
        LocalPoint(-m, -m),
        LocalPoint(width + m, -m),
        LocalPoint(width + m, height + m),
        LocalPoint(-m, height + m),
        LocalPoint(-m, -m),
    ]
    aoi = AreaOfInterest(
        boundary=tuple(unproject_local(origin, p) for p in ring_local),
        name=f"grid{params.grid_rows}x{params.grid_cols}",
    )

    rng = random.Random(params.seed)
    node_ids = sorted(local)
    pois: list[GroundTruthPoI] = []
    placed: list[LocalPoint] = []
    for i in range(params.n_pois):
        for _attempt in range(10_000):
            anchor = local[rng.choice(node_ids)]
            dist = rng.uniform(params.poi_offset_min_m, params.poi_offset_max_m)
            angle = rng.uniform(0.0, 2.0 * math.pi)
            pos_local = LocalPoint(
                anchor.x + dist * math.sin(angle), anchor.y + dist * math.cos(angle)
            )
            if params.poi_min_gap_m <= 0 or all(
                math.hypot(p.x - pos_local.x, p.y - pos_local.y) >= params.poi_min_gap_m
                for p in placed
            ):
                break
        else:
            raise InvalidParams(
                f"cannot place {params.n_pois} PoIs {params.poi_min_gap_m} m apart"
            )
        placed.append(pos_local)
        pos = unproject_local(origin, pos_local)
        visible_from = frozenset(
            nid
            for nid, p in local.items()
            if math.hypot(p.x - pos_local.x, p.y - pos_local.y) <= params.sight_radius_m
        )
        pois.append(GroundTruthPoI(id=f"poi{i}", position=pos, visible_from=visible_from))

    return World(graph=graph, aoi=aoi, pois=pois, origin=origin)


def coverage(g: ExplorableGraph, visits: VisitCounter) -> tuple[float, dict[str, int]]:
    """Percent of nodes visited at least once, plus the raw heatmap."""
    for nid in visits.counts:
        if nid not in g.nodes:
            raise UnknownNode(nid)
    if not g.nodes:
        return 0.0, {}
    visited = sum(1 for nid in g.nodes if visits.counts.get(nid, 0) > 0)
    heatmap = {nid: visits.counts.get(nid, 0) for nid in sorted(g.nodes)}
    return 100.0 * visited / len(g.nodes), heatmap


# ---------------------------------------------------------------------------
# GeoJSON / CSV interchange


def _point_feature(p: GeoPoint, props: dict) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
        "properties": props,
    }


def world_to_geojson(world: World) -> dict:
    """FeatureCollection: boundary Polygon, pano Points, edge LineStrings, poi Points."""
    features: list[dict] = []
    ring = [[v.lon, v.lat] for v in world.aoi.boundary]
    if ring[0] != ring[-1]:
        ring.append(ring[0])
    features.append(
        {
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [ring]},
            "properties": {"role": "boundary", "name": world.aoi.name},
        }
    )
    for nid in sorted(world.graph.nodes):
        n = world.graph.nodes[nid]
        features.append(
            _point_feature(
                n.position,
                {
                    "role": "pano",
                    "id": n.id,
                    "neighbors": sorted(n.neighbors),
                    "visible_nodes": sorted(n.visible_nodes),
                },
            )
        )
    for a, b, _length in world.graph.edges:
        pa, pb = world.graph.nodes[a].position, world.graph.nodes[b].position
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[pa.lon, pa.lat], [pb.lon, pb.lat]],
                },
                "properties": {"role": "edge", "nodes": [a, b]},
            }
        )
    for poi in world.pois:
        features.append(
            _point_feature(
                poi.position,
                {"role": "poi", "id": poi.id, "visible_from": sorted(poi.visible_from)},
            )
        )
    return {
        "type": "FeatureCollection",
        "features": features,
        "properties": {"origin": [world.origin.lon, world.origin.lat]},
    }


def world_from_geojson(doc: dict) -> World:
    try:
        features = doc["features"]
    except (KeyError, TypeError):
        raise DataError("not a GeoJSON FeatureCollection") from None
    boundary: tuple[GeoPoint, ...] | None = None
    name = "area"
    nodes: list[PanoNode] = []
    edges: list[tuple[str, str]] = []
    pois: list[GroundTruthPoI] = []
    for f in features:
        props = f.get("properties", {})
        geom = f.get("geometry", {})
        role = props.get("role")
        if role == "boundary":
            ring = geom["coordinates"][0]
            boundary = tuple(GeoPoint(lat, lon) for lon, lat in ring)
            name = props.get("name", name)
        elif role == "pano":
            lon, lat = geom["coordinates"]
            nodes.append(
                PanoNode(
                    id=props["id"],
                    position=GeoPoint(lat, lon),
                    neighbors=frozenset(props.get("neighbors", [])),
                    visible_nodes=frozenset(props.get("visible_nodes", [])),
                )
            )
        elif role == "edge":
            a, b = props["nodes"]
            edges.append((a, b))
        elif role == "poi":
            lon, lat = geom["coordinates"]
            pois.append(
                GroundTruthPoI(
                    id=props["id"],
                    position=GeoPoint(lat, lon),
                    visible_from=frozenset(props.get("visible_from", [])),
                )
            )
    if boundary is None:
        raise DataError("world file has no boundary feature")
    origin_coords = doc.get("properties", {}).get("origin")
    origin = (
        GeoPoint(origin_coords[1], origin_coords[0]) if origin_coords else DEFAULT_ORIGIN
    )
    return World(
        graph=ExplorableGraph(nodes, edges),
        aoi=AreaOfInterest(boundary=boundary, name=name),
        pois=pois,
        origin=origin,
    )


def save_world(world: World, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(world_to_geojson(world), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_world(path: str) -> World:
    try:
        with open(path) as fh:
            return world_from_geojson(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read world file {path}: {exc}") from exc


def heatmap_csv(world: World, heatmap: dict[str, int]) -> str:
    """CSV with one row per node: node_id,lat,lon,visits."""
    lines = ["node_id,lat,lon,visits"]
    for nid in sorted(world.graph.nodes):
        p = world.graph.nodes[nid].position
        lines.append(f"{nid},{p.lat!r},{p.lon!r},{heatmap.get(nid, 0)}")
    return "\n".join(lines) + "\n"
