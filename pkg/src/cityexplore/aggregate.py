"""Consolidate accepted detections into confirmed PoIs via DBSCAN.

Classic DBSCAN over a haversine metric: a core point has at least
``min_pts`` neighbours (itself included) within ``eps_m``; clusters are the
density-connected components of core points plus their border points, with
border points assigned to the first claiming cluster in scan order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .engine import Detection
from .errors import InvalidParams
from .geo import GeoPoint, haversine_distance, project_local, unproject_local


@dataclass(frozen=True)
class AggregationParams:
    eps_m: float = 10.0
    min_pts: int = 3

    def __post_init__(self) -> None:
        if self.eps_m <= 0:
            raise InvalidParams("eps_m must be positive")
        if self.min_pts < 1:
            raise InvalidParams("min_pts must be >= 1")


@dataclass(frozen=True)
class PoICluster:
    id: int
    centroid: GeoPoint
    members: tuple[str, ...]
    distinct_workers: int


def dbscan(
    points: Sequence[GeoPoint], params: AggregationParams
) -> tuple[list[set[int]], set[int]]:
    """Cluster point indices; returns (clusters, noise indices)."""
    n = len(points)
    neighbors: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if haversine_distance(points[i], points[j]) <= params.eps_m:
                neighbors[i].append(j)
                neighbors[j].append(i)

    UNVISITED, NOISE = -2, -1
    labels = [UNVISITED] * n
    cluster_id = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if len(neighbors[i]) + 1 < params.min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster_id
        seeds = list(neighbors[i])
        k = 0
        while k < len(seeds):
            j = seeds[k]
            k += 1
            if labels[j] == NOISE:
                labels[j] = cluster_id  # border point, first claim wins
            if labels[j] != UNVISITED:
                continue
            labels[j] = cluster_id
            if len(neighbors[j]) + 1 >= params.min_pts:
                seeds.extend(neighbors[j])
        cluster_id += 1

    clusters = [set() for _ in range(cluster_id)]
    noise: set[int] = set()
    for i, label in enumerate(labels):
        if label == NOISE:
            noise.add(i)
        else:
            clusters[label].add(i)
    return clusters, noise


def consolidate(detections: Sequence[Detection], params: AggregationParams) -> list[PoICluster]:
    """Confirmed PoIs: DBSCAN clusters of detection centroids; noise excluded.

    Cluster centroids are arithmetic means in a local frame centered on the
    cluster's first member, then unprojected.
    """
    centroids = [d.centroid for d in detections]
    clusters, _noise = dbscan(centroids, params)
    out: list[PoICluster] = []
    for cid, members in enumerate(clusters):
        ordered = sorted(members)
        frame = centroids[ordered[0]]
        locals_ = [project_local(frame, centroids[i]) for i in ordered]
        mean = unproject_local(
            frame,
            type(locals_[0])(
                sum(p.x for p in locals_) / len(locals_),
                sum(p.y for p in locals_) / len(locals_),
            ),
        )
        out.append(
            PoICluster(
                id=cid,
                centroid=mean,
                members=tuple(detections[i].id for i in ordered),
                distinct_workers=len({detections[i].worker_id for i in ordered}),
            )
        )
    return out


def clusters_geojson(clusters: Sequence[PoICluster]) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [c.centroid.lon, c.centroid.lat],
                },
                "properties": {
                    "cluster_id": c.id,
                    "n_detections": len(c.members),
                    "distinct_workers": c.distinct_workers,
                },
            }
            for c in clusters
        ],
    }
