// Live round-trip against the real service: scripted sessions complete
// through the same controller the browser uses, and the server's detections
// export must equal the transcript replayed through the library.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const TASK_CONFIG = { strategy: "taboo", num_executions: 10, num_instances: 5 };
const TABOO_CONFIG = { taboo_threshold: 3 };

let work: string;
let server: ChildProcess;
let worldDoc: any;
let worldPath: string;

interface NodeRec {
  lat: number;
  lon: number;
  neighbors: string[];
}
const nodes = new Map<string, NodeRec>();
const pois = new Map<string, { lat: number; lon: number; visibleFrom: string[] }>();

function parseWorld(doc: any): void {
  for (const f of doc.features) {
    const p = f.properties;
    if (p.role === "pano") {
      const [lon, lat] = f.geometry.coordinates;
      nodes.set(p.id, { lat, lon, neighbors: p.neighbors });
    } else if (p.role === "poi") {
      const [lon, lat] = f.geometry.coordinates;
      pois.set(p.id, { lat, lon, visibleFrom: p.visible_from });
    }
  }
}

/** Graft one pano node ~50 m north of the grid, outside the boundary. */
function graftOutsideNode(doc: any): string {
  const panos = doc.features.filter((f: any) => f.properties.role === "pano");
  const host = panos.reduce((a: any, b: any) =>
    a.geometry.coordinates[1] > b.geometry.coordinates[1] ? a : b,
  );
  const [lon, lat] = host.geometry.coordinates;
  doc.features.push({
    type: "Feature",
    geometry: { type: "Point", coordinates: [lon, lat + 0.00045] },
    properties: {
      role: "pano",
      id: "out1",
      neighbors: [host.properties.id],
      visible_nodes: [],
    },
  });
  host.properties.neighbors = [...host.properties.neighbors, "out1"];
  return host.properties.id;
}

function bfsPath(from: string, to: string): string[] {
  if (from === to) return [];
  const prev = new Map<string, string>([[from, ""]]);
  const queue = [from];
  while (queue.length) {
    const cur = queue.shift()!;
    for (const n of nodes.get(cur)!.neighbors) {
      if (prev.has(n)) continue;
      prev.set(n, cur);
      if (n === to) {
        const path = [n];
        for (let at = cur; at !== from; at = prev.get(at)!) path.unshift(at);
        return path;
      }
      queue.push(n);
    }
  }
  throw new Error(`no path ${from} -> ${to}`);
}

function bearingDeg(from: { lat: number; lon: number }, to: { lat: number; lon: number }): number {
  const k = Math.cos((from.lat * Math.PI) / 180);
  const d = (Math.atan2((to.lon - from.lon) * k, to.lat - from.lat) * 180) / Math.PI;
  return d < 0 ? d + 360 : d;
}

/** Three vantage nodes with the widest angular spread around the PoI. */
function vantageTriple(poiId: string): string[] {
  const poi = pois.get(poiId)!;
  const cands = poi.visibleFrom.filter((id) => id !== "out1");
  let best: string[] = [];
  let bestSpread = -1;
  for (let i = 0; i < cands.length; i++)
    for (let j = i + 1; j < cands.length; j++)
      for (let k = j + 1; k < cands.length; k++) {
        const bs = [cands[i], cands[j], cands[k]].map((id) => bearingDeg(poi, nodes.get(id)!));
        let spread = 360;
        for (let a = 0; a < 3; a++)
          for (let b = a + 1; b < 3; b++) {
            const raw = Math.abs(bs[a] - bs[b]) % 360;
            spread = Math.min(spread, Math.min(raw, 360 - raw));
          }
        if (spread > bestSpread) {
          bestSpread = spread;
          best = [cands[i], cands[j], cands[k]];
        }
      }
  if (bestSpread < 10) throw new Error(`poi ${poiId} has no well-spread vantages`);
  return best;
}

async function walkTo(ctl: SessionController, target: string): Promise<void> {
  for (const step of bfsPath(ctl.state.currentNode!, target)) {
    const toastsBefore = ctl.state.toasts.length;
    await ctl.moveTo(step);
    const fresh = ctl.state.toasts.slice(toastsBefore).filter((t) => t.kind === "error");
    if (fresh.length) throw new Error(`walk ${step}: ${fresh.map((t) => t.text).join("; ")}`);
  }
}

/** Visit the three vantages, aim via the server-reported bearing, submit. */
async function capture(ctl: SessionController, poiId: string) {
  for (const vantage of vantageTriple(poiId)) {
    await walkTo(ctl, vantage);
    const seen = ctl.state.scene!.pois.find((p) => p.id === poiId);
    expect(seen, `${poiId} visible from ${vantage}`).toBeDefined();
    ctl.state.headingDeg = seen!.bearing_deg;
    await ctl.shoot();
  }
  return await ctl.submit();
}

interface SessionScript {
  worker_id: string;
  seed: number;
  actions: unknown[];
  abandon?: boolean;
}
const transcript: SessionScript[] = [];

/** Start a session, dodging the grafted out-of-area node as start point. */
async function startSession(api: ApiClient, taskId: string, worker: string, seed: number) {
  for (let s = seed; ; s += 1000) {
    const ctl = new SessionController(api);
    await ctl.start(taskId, worker, s);
    if (ctl.state.currentNode !== "out1") {
      transcript.push({ worker_id: worker, seed: s, actions: ctl.state.transcript });
      return ctl;
    }
    await api.abandon(ctl.state.sessionId!);
    transcript.push({ worker_id: worker, seed: s, actions: [], abandon: true });
  }
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "explorer-ui-"));
  worldPath = join(work, "world.geojson");
  execFileSync("python3", [
    "-c",
    `import json, sys
from cityexplore.world import WorldParams, generate_synthetic_world, world_to_geojson
w = generate_synthetic_world(WorldParams(
    grid_rows=10, grid_cols=10, spacing_m=15.0, n_pois=12, seed=5, poi_min_gap_m=25.0))
json.dump(world_to_geojson(w), open(sys.argv[1], "w"))`,
    worldPath,
  ]);
  worldDoc = JSON.parse(readFileSync(worldPath, "utf-8"));
  graftOutsideNode(worldDoc);
  writeFileSync(worldPath, JSON.stringify(worldDoc));
  parseWorld(worldDoc);

  server = spawn(
    "python3",
    [
      "-c",
      `import sys, uvicorn
from cityexplore.service import Store, create_app
uvicorn.run(create_app(Store(sys.argv[1])), host="127.0.0.1", port=int(sys.argv[2]), log_level="warning")`,
      join(work, "data"),
      String(PORT),
    ],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  for (let i = 0; ; i++) {
    try {
      await fetch(`${BASE}/tasks/none`);
      break;
    } catch {
      if (i > 100) throw new Error("service did not come up");
      await new Promise((r) => setTimeout(r, 100));
    }
  }
}, 60_000);

afterAll(() => {
  server?.kill();
});

describe("UI round-trip against the live service", () => {
  it("scripted sessions complete and the export matches a library replay", { timeout: 120_000 }, async () => {
    const api = new ApiClient(BASE);
    const allPois = [...pois.keys()].filter((id) => vantageCount(id) >= 3).sort();
    expect(allPois.length).toBeGreaterThanOrEqual(10);
    const seedPois = allPois.slice(0, 5);
    const humanPois = allPois.slice(5, 10);

    const task = await api.createTask({
      task_id: "ui-roundtrip",
      world: worldDoc,
      config: TASK_CONFIG,
      taboo: TABOO_CONFIG,
    });
    expect(task.status).toBe("open");

    // three seed workers make the first five PoIs taboo
    for (let w = 1; w <= 3; w++) {
      const ctl = await startSession(api, task.task_id, `seed${w}`, w);
      for (const poiId of seedPois) {
        const res = await capture(ctl, poiId);
        expect(res?.status).toBe("accepted");
      }
      expect(ctl.state.status).toBe("completed");
    }

    // the scripted "human" session
    const ctl = await startSession(api, task.task_id, "human", 42);
    expect(ctl.state.tabooMarkers.length).toBeGreaterThanOrEqual(5);

    // 1. taboo sign: a seeded PoI shows its flag in the view...
    const tabooPoi = seedPois[0];
    await walkTo(ctl, vantageTriple(tabooPoi)[0]);
    const flagged = ctl.state.scene!.pois.find((p) => p.id === tabooPoi);
    expect(flagged?.taboo).toBe(true);

    // ...and submitting it anyway is rejected with a toast
    const rejected = await capture(ctl, tabooPoi);
    expect(rejected?.status).toBe("rejected_taboo");
    expect(ctl.state.toasts.at(-1)?.text).toMatch(/taboo/);
    while (ctl.state.pendingShots.length) await ctl.discard(0);

    // 2. boundary revert: step toward the grafted outside node
    const host = nodes.get("out1")!.neighbors[0];
    await walkTo(ctl, host);
    const before = ctl.state.currentNode;
    await ctl.moveTo("out1");
    expect(ctl.state.currentNode).toBe(before);
    expect(ctl.state.toasts.at(-1)?.text).toMatch(/outside the area/);

    // 3. five fresh detections complete the session
    for (const poiId of humanPois) {
      const res = await capture(ctl, poiId);
      expect(res?.status).toBe("accepted");
    }
    expect(ctl.state.status).toBe("completed");
    expect(ctl.state.nDetections).toBe(5);
    const remote = await api.getSession(ctl.state.sessionId!);
    expect(remote.state).toBe("completed");

    // 4. the persisted export equals the transcript replayed via the library
    const exported = readFileSync(
      join(work, "data", "tasks", task.task_id, "detections.jsonl"),
      "utf-8",
    )
      .trim()
      .split("\n")
      .map((line) => {
        const d = JSON.parse(line);
        delete d.t;
        for (const s of d.shots) delete s.t;
        return d;
      });
    expect(exported).toHaveLength(20);

    const transcriptPath = join(work, "transcript.json");
    writeFileSync(
      transcriptPath,
      JSON.stringify({
        world: worldPath,
        config: TASK_CONFIG,
        taboo: TABOO_CONFIG,
        sessions: transcript,
      }),
    );
    const replayed = JSON.parse(
      execFileSync("python3", [join(__dirname, "..", "scripts", "replay.py"), transcriptPath], {
        encoding: "utf-8",
      }),
    );
    expect(exported).toEqual(replayed);
    console.log(
      "[PASS] criterion 11: 4 scripted sessions, 20 detections, export == replay; " +
        "taboo sign and boundary-revert toast both observed",
    );
  });
});

function vantageCount(poiId: string): number {
  return pois.get(poiId)!.visibleFrom.filter((id) => id !== "out1").length;
}
