import type {
  EvidenceState,
  IncidentDoc,
  IncidentSummary,
  ScoreResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

/** Thin typed client over the review service; every number the UI shows
 * originates from one of these responses. */
export class ApiClient {
  constructor(readonly base: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.base + path, { cache: "no-store", ...init });
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      /* non-JSON error body */
    }
    if (!resp.ok) {
      const msg =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, msg);
    }
    return body as T;
  }

  health(): Promise<{ status: string; incidents: number }> {
    return this.request("/health");
  }

  listIncidents(): Promise<IncidentSummary[]> {
    return this.request("/incidents");
  }

  /** Always bypasses caches so re-opening reflects evidence posted elsewhere. */
  getIncident(id: string): Promise<IncidentDoc> {
    return this.request(`/incidents/${encodeURIComponent(id)}?t=${Date.now()}`);
  }

  postEvidence(
    id: string,
    body: { tactic: string; state: EvidenceState } | { alert: string; state: EvidenceState },
  ): Promise<ScoreResponse> {
    return this.request(`/incidents/${encodeURIComponent(id)}/evidence`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
