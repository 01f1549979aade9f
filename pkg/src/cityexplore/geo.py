"""Geodesic and planar geometry primitives.

All heavy geometry runs in a local planar frame (meters east/north of a
declared origin) obtained through an equirectangular projection. The areas
handled here are well under 1 km^2, so projection error is negligible and a
spherical Earth of radius 6,371,000 m is used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegeneratePolygon, OutOfProjectionRange

EARTH_RADIUS_M = 6_371_000.0
DEG_EPSILON = 1e-9
METERS_PER_DEG = math.pi * EARTH_RADIUS_M / 180.0

# max origin-to-point distance the local projection accepts
PROJECTION_RANGE_M = 50_000.0


@dataclass(frozen=True, eq=False)
class GeoPoint:
    """WGS84-style latitude/longitude pair, degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("coordinates must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of [-180, 180]")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GeoPoint):
            return NotImplemented
        return (
            abs(self.lat - other.lat) <= DEG_EPSILON
            and abs(self.lon - other.lon) <= DEG_EPSILON
        )

    __hash__ = None  # epsilon equality makes hashing unsound


@dataclass(frozen=True)
class LocalPoint:
    """Planar point: meters east (x) and north (y) of a declared origin."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("local coordinates must be finite")


@dataclass(frozen=True)
class Heading:
    """Compass heading, degrees clockwise from true north in [0, 360)."""

    degrees: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.degrees):
            raise ValueError("heading must be finite")
        wrapped = self.degrees % 360.0
        if wrapped >= 360.0:  # -tiny % 360 rounds up to exactly 360.0
            wrapped = 0.0
        object.__setattr__(self, "degrees", wrapped)

    def direction(self) -> tuple[float, float]:
        """Unit (east, north) vector."""
        rad = math.radians(self.degrees)
        return (math.sin(rad), math.cos(rad))


@dataclass(frozen=True)
class Ray:
    """Forward half-line from an origin along a unit direction."""

    origin: LocalPoint
    direction: tuple[float, float]

    def __post_init__(self) -> None:
        norm = math.hypot(*self.direction)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"direction norm {norm} not unit")

    @classmethod
    def from_heading(cls, origin: LocalPoint, heading: Heading) -> "Ray":
        return cls(origin, heading.direction())


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371,000 m."""
    lat1, lat2 = math.radians(a.lat), math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def project_local(origin: GeoPoint, p: GeoPoint) -> LocalPoint:
    """Equirectangular projection of ``p`` into the frame centered at ``origin``.

    Raises OutOfProjectionRange beyond 50 km, where the flat-earth error
    would no longer be negligible.
    """
    if haversine_distance(origin, p) >= PROJECTION_RANGE_M:
        raise OutOfProjectionRange(
            f"point {p} farther than {PROJECTION_RANGE_M} m from origin {origin}"
        )
    x = (p.lon - origin.lon) * math.cos(math.radians(origin.lat)) * METERS_PER_DEG
    y = (p.lat - origin.lat) * METERS_PER_DEG
    return LocalPoint(x, y)


def unproject_local(origin: GeoPoint, p: LocalPoint) -> GeoPoint:
    """Inverse of :func:`project_local`."""
    lat = origin.lat + p.y / METERS_PER_DEG
    lon = origin.lon + p.x / (math.cos(math.radians(origin.lat)) * METERS_PER_DEG)
    return GeoPoint(lat, lon)


def local_bearing(frm: LocalPoint, to: LocalPoint) -> Heading:
    """Compass bearing from one local point toward another."""
    return Heading(math.degrees(math.atan2(to.x - frm.x, to.y - frm.y)))


def ray_intersection(r1: Ray, r2: Ray) -> LocalPoint | None:
    """Intersection of two forward half-lines, or None.

    None covers parallel / anti-parallel directions (|cross| < 1e-9) and
    intersections lying behind either origin: a picture's subject is in
    front of the camera, so backward solutions are rejected.
    """
    d1x, d1y = r1.direction
    d2x, d2y = r2.direction
    cross = d1x * d2y - d1y * d2x
    if abs(cross) < 1e-9:
        return None
    ox = r2.origin.x - r1.origin.x
    oy = r2.origin.y - r1.origin.y
    t1 = (ox * d2y - oy * d2x) / cross
    t2 = (ox * d1y - oy * d1x) / cross
    if t1 < 0.0 or t2 < 0.0:
        return None
    return LocalPoint(r1.origin.x + t1 * d1x, r1.origin.y + t1 * d1y)


def point_segment_distance(p: LocalPoint, a: LocalPoint, b: LocalPoint) -> float:
    """Distance from ``p`` to the segment ``a``-``b`` (not the supporting line)."""
    abx, aby = b.x - a.x, b.y - a.y
    apx, apy = p.x - a.x, p.y - a.y
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return math.hypot(apx, apy)
    t = max(0.0, min(1.0, (apx * abx + apy * aby) / denom))
    return math.hypot(apx - t * abx, apy - t * aby)


def triangle_centroid_max_side_distance(
    p1: LocalPoint, p2: LocalPoint, p3: LocalPoint
) -> tuple[LocalPoint, float]:
    """Centroid of a triangle and the max centroid-to-side distance.

    Sides are treated as segments. A degenerate triangle (all vertices
    coincident) is valid and yields dmax = 0.
    """
    centroid = LocalPoint((p1.x + p2.x + p3.x) / 3.0, (p1.y + p2.y + p3.y) / 3.0)
    dmax = max(
        point_segment_distance(centroid, p1, p2),
        point_segment_distance(centroid, p2, p3),
        point_segment_distance(centroid, p3, p1),
    )
    return centroid, dmax


def _distinct_ring(ring: list[GeoPoint]) -> list[GeoPoint]:
    out: list[GeoPoint] = []
    for p in ring:
        if not out or p != out[-1]:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def point_in_polygon(ring: list[GeoPoint], p: GeoPoint) -> bool:
    """Ray-casting point-in-polygon in a local frame; boundary counts inside.

    The ring may be explicitly closed (first == last) or not.
    """
    verts = _distinct_ring(list(ring))
    if len(verts) < 3:
        raise DegeneratePolygon("polygon ring needs at least 3 distinct vertices")
    origin = GeoPoint(
        sum(v.lat for v in verts) / len(verts),
        sum(v.lon for v in verts) / len(verts),
    )
    poly = [project_local(origin, v) for v in verts]
    q = project_local(origin, p)
    n = len(poly)
    for i in range(n):
        if point_segment_distance(q, poly[i], poly[(i + 1) % n]) < 1e-9:
            return True
    inside = False
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if (a.y > q.y) != (b.y > q.y):
            x_cross = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y)
            if q.x < x_cross:
                inside = not inside
    return inside
