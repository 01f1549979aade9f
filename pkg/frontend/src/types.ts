// Wire types for the cityexplore HTTP API. Field names mirror the server
// JSON verbatim, so these stay snake_case.

export type SessionStatus = "active" | "completed" | "escaped" | "abandoned";

export interface SessionInfo {
  session_id: string;
  worker_id: string;
  state: SessionStatus;
  current_node: string;
  pending_shots: number;
  n_detections: number;
  distance_walked_m: number;
}

export interface LatLon {
  lat: number;
  lon: number;
}

export interface NodeInfo {
  id: string;
  lat: number;
  lon: number;
  bearing_deg: number;
  distance_m: number;
}

export interface PoiInfo {
  id: string;
  bearing_deg: number;
  distance_m: number;
  taboo: boolean;
}

export interface ViewResponse {
  session: SessionInfo;
  node: { id: string; lat: number; lon: number };
  neighbors: NodeInfo[];
  visible_nodes: NodeInfo[];
  pois: PoiInfo[];
  boundary: LatLon[];
}

export interface StartResponse {
  session_id: string;
  start_node: { id: string; lat: number; lon: number };
  instructions: string;
  taboo_markers: LatLon[];
}

export interface MoveResponse {
  outcome: "moved" | "reverted";
  node: string;
  escaped: boolean;
  explanation: string | null;
  session: SessionInfo;
}

export interface PendingShot {
  node_id: string;
  heading_deg: number;
}

export interface ShotsResponse {
  pending: PendingShot[];
  session: SessionInfo;
}

export interface SubmitResponse {
  status:
    | "accepted"
    | "rejected_triangulation"
    | "rejected_duplicate"
    | "rejected_taboo";
  reason: string | null;
  session: SessionInfo;
  detection?: { id: string; centroid: LatLon; dmax_m: number };
}

export interface TaskInfo {
  task_id: string;
  status: "open" | "closed";
  completed_executions: number;
  num_executions: number;
  strategy: "basic" | "taboo";
  instructions: string;
  allow_repeat: boolean;
}
