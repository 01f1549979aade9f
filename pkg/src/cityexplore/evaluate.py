"""Map comparison, sampling curves and behavioral metrics.

Batch analytics over finished experiments: Jaccard map overlap with greedy
nearest matching, confirmed-count sampling curves, detections-per-confirmed
histograms, and per-session behavior stats derived from action logs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .aggregate import AggregationParams, consolidate
from .engine import ActionKind, Detection
from .errors import MalformedLog
from .geo import GeoPoint, haversine_distance


@dataclass(frozen=True)
class PoIMap:
    name: str
    points: tuple[tuple[str, GeoPoint], ...]  # (id, position)

    def __post_init__(self) -> None:
        ids = [pid for pid, _ in self.points]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate point ids in map")


@dataclass(frozen=True)
class MapComparison:
    map_a: str
    map_b: str
    matched: tuple[tuple[str, str], ...]
    size_a: int
    size_b: int
    intersection: int
    a_minus_b: int
    b_minus_a: int
    union: int
    jaccard: float
    match_threshold_m: float


def match_maps(a: PoIMap, b: PoIMap, threshold_m: float = 10.0) -> MapComparison:
    """One-to-one greedy matching of the globally closest cross-map pairs.

    Pairs farther than the threshold never match. With PoIs typically
    spaced wider than the threshold this coincides with optimal matching.
    """
    pairs: list[tuple[float, str, str]] = []
    pos_a = dict(a.points)
    pos_b = dict(b.points)
    for ida, pa in a.points:
        for idb, pb in b.points:
            d = haversine_distance(pa, pb)
            if d <= threshold_m:
                pairs.append((d, ida, idb))
    pairs.sort()
    used_a: set[str] = set()
    used_b: set[str] = set()
    matched: list[tuple[str, str]] = []
    for _d, ida, idb in pairs:
        if ida in used_a or idb in used_b:
            continue
        used_a.add(ida)
        used_b.add(idb)
        matched.append((ida, idb))
    inter = len(matched)
    union = len(pos_a) + len(pos_b) - inter
    return MapComparison(
        map_a=a.name,
        map_b=b.name,
        matched=tuple(matched),
        size_a=len(pos_a),
        size_b=len(pos_b),
        intersection=inter,
        a_minus_b=len(pos_a) - inter,
        b_minus_a=len(pos_b) - inter,
        union=union,
        jaccard=inter / union if union else 1.0,
        match_threshold_m=threshold_m,
    )


def comparison_csv(rows: Iterable[MapComparison]) -> str:
    lines = ["mapA,mapB,|A|,|B|,union,intersect,AminusB,BminusA,jaccard"]
    for r in rows:
        lines.append(
            f"{r.map_a},{r.map_b},{r.size_a},{r.size_b},{r.union},"
            f"{r.intersection},{r.a_minus_b},{r.b_minus_a},{r.jaccard!r}"
        )
    return "\n".join(lines) + "\n"


def sampling_curve(
    executions: Sequence[Sequence[Detection]],
    params: AggregationParams,
    n_samples: int = 200,
    rng_seed: int = 0,
) -> list[float]:
    """Mean confirmed count over random execution subsets of each size.

    For each n in [0, N], draws ``n_samples`` uniform size-n subsets of the
    executions, consolidates the union of their detections, and averages
    the confirmed-cluster count. Deterministic given the seed.
    """
    n_total = len(executions)
    curve: list[float] = []
    for n in range(n_total + 1):
        rng = random.Random((rng_seed + 1) * 100003 + n)  # sub-stream per n
        if n == 0:
            curve.append(0.0)
            continue
        total = 0
        for _ in range(n_samples):
            subset = rng.sample(range(n_total), n)
            dets = [d for i in subset for d in executions[i]]
            total += len(consolidate(dets, params))
        curve.append(total / n_samples)
    return curve


def sampling_curve_csv(curve: Sequence[float]) -> str:
    lines = ["n,mean_confirmed"]
    lines.extend(f"{n},{v!r}" for n, v in enumerate(curve))
    return "\n".join(lines) + "\n"


def detections_per_confirmed(clusters) -> list[int]:
    """Member count per confirmed cluster, sorted descending for plotting."""
    return sorted((len(c.members) for c in clusters), reverse=True)


@dataclass(frozen=True)
class SessionStats:
    session_id: str
    duration_s: float
    distance_m: float
    n_detections: int
    steps_after_detection: tuple[int, ...]  # moves between detection k and k+1 / end
    error_counts: dict
    escaped: bool
    escape_distance_m: float | None = None
    escape_time_since_detection_s: float | None = None


_ERROR_KINDS = {
    ActionKind.BOUNDARY_REVERT.value: "boundary",
    ActionKind.SUBMIT_FAIL_TRIANGULATION.value: "triangulation",
    ActionKind.SUBMIT_FAIL_DUPLICATE.value: "duplicate",
    ActionKind.SUBMIT_FAIL_TABOO.value: "taboo",
}


def behavior_stats(log_entries: Sequence[dict]) -> list[SessionStats]:
    """Per-session behavior metrics from archived action-log entries.

    Accepts the JSONL dict form ({session_id, t, kind, payload}); abandoned
    sessions never reach the archive, so every session seen here finished.
    """
    by_session: dict[str, list[dict]] = {}
    for e in log_entries:
        try:
            by_session.setdefault(e["session_id"], []).append(e)
        except (TypeError, KeyError):
            raise MalformedLog(f"bad log entry: {e!r}") from None

    out: list[SessionStats] = []
    for sid in sorted(by_session):
        entries = by_session[sid]
        times = [e["t"] for e in entries]
        if times != sorted(times):
            raise MalformedLog(f"timestamps not monotone in session {sid}")
        distance = 0.0
        errors = {v: 0 for v in _ERROR_KINDS.values()}
        steps: list[int] = []
        current_steps = 0
        n_det = 0
        escaped = False
        esc_dist = esc_time = None
        for e in entries:
            kind = e["kind"]
            payload = e.get("payload", {})
            if kind == ActionKind.MOVE.value:
                if not payload.get("initial"):
                    distance += payload.get("step_m", 0.0)
                    current_steps += 1
            elif kind == ActionKind.SUBMIT_OK.value:
                steps.append(current_steps)
                current_steps = 0
                n_det += 1
            elif kind == ActionKind.ESCAPE.value:
                escaped = True
                esc_dist = payload.get("distance_walked_m")
                esc_time = payload.get("time_since_last_detection_s")
            elif kind in _ERROR_KINDS:
                errors[_ERROR_KINDS[kind]] += 1
        steps.append(current_steps)  # tail after last detection (or whole session)
        out.append(
            SessionStats(
                session_id=sid,
                duration_s=times[-1] - times[0],
                distance_m=distance,
                n_detections=n_det,
                steps_after_detection=tuple(steps),
                error_counts=errors,
                escaped=escaped,
                escape_distance_m=esc_dist,
                escape_time_since_detection_s=esc_time,
            )
        )
    return out


def behavior_csv(stats: Sequence[SessionStats]) -> str:
    lines = [
        "session_id,duration_s,distance_m,n_detections,"
        "errors_boundary,errors_triangulation,errors_duplicate,errors_taboo,escaped"
    ]
    for s in stats:
        e = s.error_counts
        lines.append(
            f"{s.session_id},{s.duration_s!r},{s.distance_m!r},{s.n_detections},"
            f"{e['boundary']},{e['triangulation']},{e['duplicate']},{e['taboo']},"
            f"{int(s.escaped)}"
        )
    return "\n".join(lines) + "\n"


def escape_scatter_csv(
    stats: Sequence[SessionStats],
    escape_distance_m: float | None = None,
    escape_time_s: float | None = None,
) -> str:
    """Rows for escaped sessions only; the configured escape thresholds are
    embedded as comment metadata so a plot can draw the reference lines."""
    lines = []
    if escape_distance_m is not None:
        lines.append(f"# escape_distance_m={escape_distance_m!r}")
    if escape_time_s is not None:
        lines.append(f"# escape_time_s={escape_time_s!r}")
    lines.append("session_id,distance_walked_m,time_since_last_detection_s,n_detections")
    for s in stats:
        if s.escaped:
            lines.append(
                f"{s.session_id},{s.escape_distance_m!r},"
                f"{s.escape_time_since_detection_s!r},{s.n_detections}"
            )
    return "\n".join(lines) + "\n"
