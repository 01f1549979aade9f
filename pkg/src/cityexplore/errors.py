"""Exception types shared across the package."""


class CityExploreError(Exception):
    """Base class; carries a machine-readable code for the HTTP layer."""

    code = "error"


class OutOfProjectionRange(CityExploreError):
    code = "out_of_projection_range"


class DegeneratePolygon(CityExploreError):
    code = "degenerate_polygon"


class EmptyGraph(CityExploreError):
    code = "empty_graph"


class InvalidParams(CityExploreError):
    code = "invalid_params"


class UnknownNode(CityExploreError):
    code = "unknown_node"


class ExperimentClosed(CityExploreError):
    code = "experiment_closed"


class IllegalTarget(CityExploreError):
    code = "illegal_target"


class SessionNotActive(CityExploreError):
    code = "session_not_active"


class TooManyShots(CityExploreError):
    code = "too_many_shots"


class NoSuchShot(CityExploreError):
    code = "no_such_shot"


class WrongShotCount(CityExploreError):
    code = "wrong_shot_count"


class MalformedLog(CityExploreError):
    code = "malformed_log"


class DataError(CityExploreError):
    """Unreadable or inconsistent input files (CLI exit code 2)."""

    code = "data_error"
