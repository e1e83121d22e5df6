export interface PointPayload {
  kind: "point";
  x: number;
  y: number;
}

export interface ImagePayload {
  kind: "image";
  png_base64: string;
}

export type Payload = PointPayload | ImagePayload;

export interface PendingRequest {
  request_id: string;
  sample_id: number;
  payload: Payload;
  entropy: number;
  suggestion: number;
  issued_iteration: number;
  age_s: number;
}

export interface RunStatus {
  iteration: number;
  total_iterations: number;
  val_acc: number | null;
  n_labeled: number;
  labels_acquired: number;
  label_budget: number;
  theta: number | null;
  state: "running" | "done";
  history: number[];
}

export type SubmitResult =
  | { ok: true }
  | { ok: false; reason: string; status: number };
