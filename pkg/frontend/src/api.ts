import type {
  MoveResponse,
  SessionInfo,
  ShotsResponse,
  StartResponse,
  SubmitResponse,
  TaskInfo,
  ViewResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over fetch; one method per endpoint, nothing cached. */
export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (...a) => globalThis.fetch(...a),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchFn(this.base + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await res.json().catch(() => ({}));
    if (!res.ok) {
      throw new ApiError(
        res.status,
        typeof payload.error === "string" ? payload.error : "http_error",
        typeof payload.detail === "string" ? payload.detail : `HTTP ${res.status}`,
      );
    }
    return payload as T;
  }

  createTask(body: Record<string, unknown>): Promise<TaskInfo> {
    return this.request("POST", "/tasks", body);
  }

  getTask(taskId: string): Promise<TaskInfo> {
    return this.request("GET", `/tasks/${taskId}`);
  }

  startSession(taskId: string, workerId: string, seed: number): Promise<StartResponse> {
    return this.request("POST", `/tasks/${taskId}/sessions`, {
      worker_id: workerId,
      seed,
    });
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  move(sessionId: string, target: string): Promise<MoveResponse> {
    return this.request("POST", `/sessions/${sessionId}/move`, { target });
  }

  takeShot(sessionId: string, headingDeg: number): Promise<ShotsResponse> {
    return this.request("POST", `/sessions/${sessionId}/shots`, { heading: headingDeg });
  }

  discardShot(sessionId: string, index: number): Promise<ShotsResponse> {
    return this.request("DELETE", `/sessions/${sessionId}/shots/${index}`);
  }

  submit(sessionId: string): Promise<SubmitResponse> {
    return this.request("POST", `/sessions/${sessionId}/submit`, {});
  }

  abandon(sessionId: string): Promise<{ state: string }> {
    return this.request("POST", `/sessions/${sessionId}/abandon`, {});
  }

  view(sessionId: string): Promise<ViewResponse> {
    return this.request("GET", `/sessions/${sessionId}/view`);
  }
}
