/** Thin client for the annotation service /v1 API. */

import type {
  BatchResponse,
  ExplanationPayload,
  PendingLabel,
  SessionConfig,
  SessionSnapshot,
  SubmitResponse,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** 409: batch outstanding or model training; safe to retry after a delay. */
export class BusyError extends ApiError {}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      if (response.status === 409) throw new BusyError(409, detail);
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async createSession(config: SessionConfig): Promise<string> {
    const body = await this.request<{ session_id: string }>("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config),
    });
    return body.session_id;
  }

  snapshot(sessionId: string): Promise<SessionSnapshot> {
    return this.request(`/v1/sessions/${sessionId}`);
  }

  nextBatch(sessionId: string): Promise<BatchResponse> {
    return this.request(`/v1/sessions/${sessionId}/next-batch`);
  }

  submitLabels(sessionId: string, labels: PendingLabel[]): Promise<SubmitResponse> {
    return this.request(`/v1/sessions/${sessionId}/labels`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ labels }),
    });
  }

  explanation(
    sessionId: string,
    docId: string,
    method: "lime" | "shap",
  ): Promise<ExplanationPayload> {
    const params = new URLSearchParams({ session: sessionId, method });
    return this.request(`/v1/documents/${docId}/explanation?${params}`);
  }

  async learningCurve(sessionId: string): Promise<string> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/v1/sessions/${sessionId}/learning-curve`,
    );
    if (!response.ok) throw new ApiError(response.status, response.statusText);
    return response.text();
  }
}
