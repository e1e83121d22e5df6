import type { PendingRequest, RunStatus, SubmitResult } from "./types.js";

type FetchLike = typeof fetch;

/** Thin client for the versioned oracle API; fetch is injectable for tests. */
export class OracleClient {
  constructor(
    private runId: string,
    private baseUrl = "",
    private fetchFn: FetchLike = fetch.bind(globalThis),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}/v1/runs/${encodeURIComponent(this.runId)}${path}`;
  }

  async fetchPending(): Promise<PendingRequest[]> {
    const resp = await this.fetchFn(this.url("/requests?state=pending"));
    if (!resp.ok) {
      throw new Error(`pending requests fetch failed: ${resp.status}`);
    }
    const body = await resp.json();
    return body.requests as PendingRequest[];
  }

  async fetchStatus(): Promise<RunStatus> {
    const resp = await this.fetchFn(this.url("/status"));
    if (!resp.ok) {
      throw new Error(`status fetch failed: ${resp.status}`);
    }
    return (await resp.json()) as RunStatus;
  }

  async submitLabel(requestId: string, label: number): Promise<SubmitResult> {
    const resp = await this.fetchFn(this.url("/answers"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ request_id: requestId, label }),
    });
    if (resp.ok) {
      return { ok: true };
    }
    let reason = `rejected (${resp.status})`;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "string") {
        reason = body.detail;
      }
    } catch {
      // keep the generic reason when the body is not JSON
    }
    return { ok: false, reason, status: resp.status };
  }
}
