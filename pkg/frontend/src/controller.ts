import { ApiClient, ApiError } from "./api.js";
import {
  applyScene,
  applySession,
  applyShots,
  initialState,
  pushToast,
  record,
  type ViewState,
} from "./state.js";
import type { SubmitResponse } from "./types.js";

const REASON_TEXT: Record<string, string> = {
  no_intersection: "The three shots don't triangulate — re-aim and try again.",
  too_spread: "Triangulation too loose — take the shots from closer vantage points.",
};

/**
 * Maps user gestures to API calls, one mutating request per gesture, and
 * folds the responses back into the state. The server is the source of
 * truth: nothing here changes session state before a response arrives.
 */
export class SessionController {
  readonly state: ViewState = initialState();

  constructor(private readonly api: ApiClient) {}

  async start(taskId: string, workerId: string, seed: number): Promise<void> {
    const res = await this.api.startSession(taskId, workerId, seed);
    this.state.sessionId = res.session_id;
    this.state.status = "active";
    this.state.currentNode = res.start_node.id;
    this.state.tabooMarkers = res.taboo_markers;
    await this.refreshScene();
  }

  /** Arrow click or double-click on a distant visible node. */
  async moveTo(target: string): Promise<void> {
    const sid = this.requireSession();
    const res = await this.guard(() => this.api.move(sid, target));
    if (!res) return;
    record(this.state, { kind: "move", target });
    applySession(this.state, res.session);
    if (res.outcome === "reverted") {
      pushToast(this.state, "error", "That point is outside the area — moved back.");
    }
    if (res.escaped) {
      pushToast(this.state, "info", "Escape condition met — session complete, full reward.");
      return;
    }
    if (res.outcome === "moved") await this.refreshScene();
  }

  /** Shoot button: photographs whatever the crosshair points at. */
  async shoot(): Promise<void> {
    const sid = this.requireSession();
    const heading = this.state.headingDeg;
    const res = await this.guard(() => this.api.takeShot(sid, heading));
    if (!res) return;
    record(this.state, { kind: "shot", heading_deg: heading });
    applyShots(this.state, res.pending);
    applySession(this.state, res.session);
    if (this.state.status === "escaped") {
      pushToast(this.state, "info", "Escape condition met — session complete, full reward.");
    }
  }

  async discard(index: number): Promise<void> {
    const sid = this.requireSession();
    const res = await this.guard(() => this.api.discardShot(sid, index));
    if (!res) return;
    record(this.state, { kind: "discard", index });
    applyShots(this.state, res.pending);
    applySession(this.state, res.session);
  }

  get canSubmit(): boolean {
    return this.state.status === "active" && this.state.pendingShots.length === 3;
  }

  async submit(): Promise<SubmitResponse | null> {
    const sid = this.requireSession();
    const res = await this.guard(() => this.api.submit(sid));
    if (!res) return null;
    record(this.state, { kind: "submit" });
    applySession(this.state, res.session);
    switch (res.status) {
      case "accepted":
        this.state.pendingShots = [];
        pushToast(this.state, "info", `PoI recorded (${this.state.nDetections} so far).`);
        break;
      case "rejected_triangulation":
        pushToast(this.state, "error", REASON_TEXT[res.reason ?? ""] ?? "Submission rejected.");
        break;
      case "rejected_duplicate":
        pushToast(this.state, "error", "You already reported this PoI.");
        break;
      case "rejected_taboo":
        pushToast(this.state, "error", "This PoI is taboo — walk away from it.");
        break;
    }
    if (this.state.status === "completed") {
      pushToast(this.state, "info", "All instances done — session complete.");
    }
    return res;
  }

  async refreshScene(): Promise<void> {
    const sid = this.requireSession();
    const scene = await this.guard(() => this.api.view(sid));
    if (scene) applyScene(this.state, scene);
  }

  private requireSession(): string {
    if (!this.state.sessionId) throw new Error("no active session");
    return this.state.sessionId;
  }

  /** Turn API/network failures into toasts instead of unhandled rejections. */
  private async guard<T>(call: () => Promise<T>): Promise<T | null> {
    try {
      return await call();
    } catch (err) {
      if (err instanceof ApiError) {
        pushToast(this.state, "error", err.message);
      } else {
        pushToast(this.state, "error", "Network error — action not applied; retry.");
      }
      return null;
    }
  }
}
