// Thin typed wrapper around the service's JSON API. Every method returns the
// parsed body; non-2xx responses throw ApiError carrying the service's own
// {error, detail, field} payload so panels can surface it inline.

import type {
  AssessRequest,
  AssessmentResponse,
  ErrorBody,
  FeatureMap,
  HealthDoc,
  PdpResponse,
  RevisionsResponse,
  RulesResponse,
  TwinState,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  body: ErrorBody;

  constructor(status: number, body: ErrorBody) {
    super(`${body.error}: ${body.detail}`);
    this.status = status;
    this.body = body;
  }
}

export class Api {
  baseUrl: string;
  token: string;

  constructor(baseUrl: string, token = "") {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    let doc: unknown;
    try {
      doc = JSON.parse(text);
    } catch {
      doc = { error: "bad_response", detail: text.slice(0, 200) };
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, doc as ErrorBody);
    }
    return doc as T;
  }

  health(): Promise<HealthDoc> {
    return this.request("GET", "/health");
  }

  listPatients(): Promise<{ patients: string[] }> {
    return this.request("GET", "/patients");
  }

  getPatient(id: string): Promise<TwinState> {
    return this.request("GET", `/patients/${encodeURIComponent(id)}`);
  }

  createPatient(id: string, baseline: FeatureMap, observedAt?: string): Promise<TwinState> {
    const body: Record<string, unknown> = { id, baseline };
    if (observedAt) body.observed_at = observedAt;
    return this.request("POST", "/patients", body);
  }

  observe(id: string, feature: string, value: number, observedAt?: string): Promise<TwinState> {
    const body: Record<string, unknown> = { feature, value };
    if (observedAt) body.observed_at = observedAt;
    return this.request("POST", `/patients/${encodeURIComponent(id)}/observations`, body);
  }

  history(id: string, feature: string): Promise<{ feature: string; series: { observed_at: string; value: number }[] }> {
    return this.request("GET", `/patients/${encodeURIComponent(id)}/history?feature=${encodeURIComponent(feature)}`);
  }

  assess(req: AssessRequest): Promise<AssessmentResponse> {
    return this.request("POST", "/assess", req);
  }

  pdp(feature: string, gridSize?: number): Promise<PdpResponse> {
    const qs = gridSize ? `&grid_size=${gridSize}` : "";
    return this.request("GET", `/pdp?feature=${encodeURIComponent(feature)}${qs}`);
  }

  rules(): Promise<RulesResponse> {
    return this.request("GET", "/rules");
  }

  revisions(): Promise<RevisionsResponse> {
    return this.request("GET", "/revisions");
  }

  review(revisionId: string, verdict: "accept" | "reject", reviewer: string): Promise<{ rules_version: string }> {
    return this.request("POST", `/revisions/${encodeURIComponent(revisionId)}/review`, {
      verdict,
      reviewer,
    });
  }
}
