import type {
  LatLon,
  PendingShot,
  SessionInfo,
  SessionStatus,
  ViewResponse,
} from "./types.js";
import { wrapDeg } from "./view.js";

export interface Toast {
  kind: "error" | "info";
  text: string;
}

/** One recorded mutation, enough to replay the session elsewhere. */
export type TranscriptEntry =
  | { kind: "move"; target: string }
  | { kind: "shot"; heading_deg: number }
  | { kind: "discard"; index: number }
  | { kind: "submit" };

// All rendering reads from here; all writes happen in the apply* functions
// below, and only ever from a server response (no optimistic updates).
export interface ViewState {
  sessionId: string | null;
  status: SessionStatus | "idle";
  currentNode: string | null;
  headingDeg: number; // client-side aim, the one piece of purely local state
  pendingShots: PendingShot[];
  nDetections: number;
  distanceWalkedM: number;
  tabooMarkers: LatLon[];
  scene: ViewResponse | null;
  toasts: Toast[];
  transcript: TranscriptEntry[];
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    status: "idle",
    currentNode: null,
    headingDeg: 0,
    pendingShots: [],
    nDetections: 0,
    distanceWalkedM: 0,
    tabooMarkers: [],
    scene: null,
    toasts: [],
    transcript: [],
  };
}

export function applySession(state: ViewState, info: SessionInfo): void {
  state.status = info.state;
  state.currentNode = info.current_node;
  state.nDetections = info.n_detections;
  state.distanceWalkedM = info.distance_walked_m;
  // pending count comes with every response; the full shot list only with
  // shot responses, so reconcile the cheap way when they disagree
  if (info.pending_shots !== state.pendingShots.length) {
    state.pendingShots = state.pendingShots.slice(0, info.pending_shots);
  }
}

export function applyShots(state: ViewState, pending: PendingShot[]): void {
  state.pendingShots = [...pending];
}

export function applyScene(state: ViewState, scene: ViewResponse): void {
  state.scene = scene;
  applySession(state, scene.session);
}

export function rotate(state: ViewState, deltaDeg: number): void {
  state.headingDeg = wrapDeg(state.headingDeg + deltaDeg);
}

export function pushToast(state: ViewState, kind: Toast["kind"], text: string): void {
  state.toasts.push({ kind, text });
  if (state.toasts.length > 5) state.toasts.shift();
}

export function dismissToast(state: ViewState, index: number): void {
  state.toasts.splice(index, 1);
}

export function record(state: ViewState, entry: TranscriptEntry): void {
  state.transcript.push(entry);
}
