#!/usr/bin/env python3
"""Replay a UI transcript through the library and dump the detections.

Input: a JSON file with the world path, task/taboo config, and per-session
action lists as recorded by the browser client. Output (stdout): the
detection list in the store's export shape, minus timestamps.
"""

import json
import sys

from cityexplore.engine import Experiment, TabooConfig, TaskConfig
from cityexplore.geo import Heading
from cityexplore.world import load_world


def main() -> int:
    with open(sys.argv[1]) as fh:
        doc = json.load(fh)
    world = load_world(doc["world"])
    exp = Experiment(
        world,
        TaskConfig(**doc["config"]),
        TabooConfig(**doc["taboo"]) if doc.get("taboo") else None,
    )
    for spec in doc["sessions"]:
        session = exp.start_session(spec["worker_id"], spec["seed"])
        for action in spec["actions"]:
            kind = action["kind"]
            if kind == "move":
                exp.move(session, action["target"])
            elif kind == "shot":
                exp.take_shot(session, Heading(action["heading_deg"]))
            elif kind == "discard":
                exp.discard_shot(session, action["index"])
            elif kind == "submit":
                exp.submit(session)
            else:
                raise ValueError(f"unknown transcript action {kind!r}")
        if spec.get("abandon"):
            exp.abandon(session)
    out = [
        {
            "id": d.id,
            "worker_id": d.worker_id,
            "session_id": d.session_id,
            "centroid": [d.centroid.lon, d.centroid.lat],
            "dmax_m": d.dmax,
            "shots": [
                {
                    "node_id": s.node_id,
                    "heading_deg": s.heading.degrees,
                    "position": [s.position.lon, s.position.lat],
                }
                for s in d.shots
            ],
        }
        for d in exp.detections
    ]
    json.dump(out, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
