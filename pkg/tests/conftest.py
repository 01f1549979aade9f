"""Shared fixtures and world-building helpers."""

from __future__ import annotations

import pytest

from cityexplore.geo import GeoPoint, LocalPoint, unproject_local
from cityexplore.world import (
    AreaOfInterest,
    ExplorableGraph,
    GroundTruthPoI,
    PanoNode,
    World,
)

ORIGIN = GeoPoint(46.07, 11.12)


def build_local_world(
    nodes: dict[str, tuple[float, float]],
    edges: list[tuple[str, str]] | None = None,
    aoi_ring: list[tuple[float, float]] | None = None,
    pois: list[tuple[str, tuple[float, float], list[str]]] | None = None,
    origin: GeoPoint = ORIGIN,
    all_visible: bool = True,
) -> World:
    """World from local (meters east/north) coordinates.

    By default every node can see every other node, which keeps scripted
    engine tests free of path-finding concerns.
    """
    if edges is None:
        ids = sorted(nodes)
        edges = [(ids[i], ids[i + 1]) for i in range(len(ids) - 1)]
    neighbors: dict[str, set[str]] = {nid: set() for nid in nodes}
    for a, b in edges:
        neighbors[a].add(b)
        neighbors[b].add(a)
    if aoi_ring is None:
        xs = [p[0] for p in nodes.values()]
        ys = [p[1] for p in nodes.values()]
        m = 20.0
        aoi_ring = [
            (min(xs) - m, min(ys) - m),
            (max(xs) + m, min(ys) - m),
            (max(xs) + m, max(ys) + m),
            (min(xs) - m, max(ys) + m),
        ]
    pano = [
        PanoNode(
            id=nid,
            position=unproject_local(origin, LocalPoint(x, y)),
            neighbors=frozenset(neighbors[nid]),
            visible_nodes=frozenset(n for n in nodes if n != nid) if all_visible else frozenset(),
        )
        for nid, (x, y) in nodes.items()
    ]
    boundary = tuple(unproject_local(origin, LocalPoint(x, y)) for x, y in aoi_ring)
    truth = [
        GroundTruthPoI(
            id=pid,
            position=unproject_local(origin, LocalPoint(x, y)),
            visible_from=frozenset(vis),
        )
        for pid, (x, y), vis in (pois or [])
    ]
    return World(
        graph=ExplorableGraph(pano, edges),
        aoi=AreaOfInterest(boundary=boundary, name="test"),
        pois=truth,
        origin=origin,
    )


@pytest.fixture
def line_world() -> World:
    """21 nodes 100 m apart along a meridian; distances are exact multiples
    of 100 m to floating precision."""
    nodes = {f"n{i:02d}": (0.0, 100.0 * i) for i in range(21)}
    return build_local_world(nodes)
