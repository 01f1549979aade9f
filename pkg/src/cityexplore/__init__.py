"""Session-based street-view exploration engine and simulator."""

from .aggregate import AggregationParams, PoICluster, consolidate, dbscan
from .engine import (
    Detection,
    Experiment,
    Session,
    SessionState,
    SubmitStatus,
    TabooConfig,
    TaskConfig,
)
from .evaluate import MapComparison, PoIMap, match_maps, sampling_curve
from .geo import GeoPoint, Heading, LocalPoint, Ray, haversine_distance
from .sim import ExperimentConfig, WorkerPolicy, run_experiment
from .world import (
    AreaOfInterest,
    ExplorableGraph,
    GroundTruthPoI,
    PanoNode,
    World,
    WorldParams,
    generate_synthetic_world,
)

__all__ = [
    "AggregationParams",
    "AreaOfInterest",
    "Detection",
    "Experiment",
    "ExperimentConfig",
    "ExplorableGraph",
    "GeoPoint",
    "GroundTruthPoI",
    "Heading",
    "LocalPoint",
    "MapComparison",
    "PanoNode",
    "PoICluster",
    "PoIMap",
    "Ray",
    "Session",
    "SessionState",
    "SubmitStatus",
    "TabooConfig",
    "TaskConfig",
    "WorkerPolicy",
    "World",
    "WorldParams",
    "consolidate",
    "dbscan",
    "generate_synthetic_world",
    "haversine_distance",
    "match_maps",
    "run_experiment",
    "sampling_curve",
]

__version__ = "0.1.0"
