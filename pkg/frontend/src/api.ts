// Typed client for the labeling-session HTTP endpoints.

export interface SessionStatus {
  session_id: string;
  round: number;
  model_version: number;
  labeled_count: number;
  pending_count: number;
  pool_count: number;
  target_total: number;
  complete: boolean;
}

export interface PendingMessage {
  id: string;
  text: string;
  score: number | null;
}

export interface BatchResponse {
  session_id: string;
  round: number;
  model_version: number;
  messages: PendingMessage[];
}

export interface Schedule {
  seed_size: number;
  batch_size: number;
  target_total: number;
}

export type Label = 0 | 1;

export interface LabelDecision {
  id: string;
  label: Label;
}

export class HttpError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** The server rejected a submission; `ids` lists the offending messages. */
export class ConflictError extends HttpError {
  constructor(message: string, public ids: string[]) {
    super(409, message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private base: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    // bind so `this` inside the browser fetch stays the window
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (response.status === 409) {
      const body = await response.json().catch(() => ({ detail: {} }));
      const detail = body.detail ?? {};
      throw new ConflictError(detail.message ?? "conflict", detail.ids ?? []);
    }
    if (!response.ok) {
      const text = await response.text().catch(() => "");
      throw new HttpError(response.status, `${response.status}: ${text}`);
    }
    return (await response.json()) as T;
  }

  createSession(seed?: number, schedule?: Schedule): Promise<SessionStatus> {
    return this.request("/v1/sessions", {
      method: "POST",
      body: JSON.stringify({ seed: seed ?? null, schedule: schedule ?? null }),
    });
  }

  getStatus(sessionId: string): Promise<SessionStatus> {
    return this.request(`/v1/sessions/${sessionId}/status`);
  }

  getBatch(sessionId: string): Promise<BatchResponse> {
    return this.request(`/v1/sessions/${sessionId}/batch`);
  }

  submitLabels(sessionId: string, labels: LabelDecision[]): Promise<SessionStatus> {
    return this.request(`/v1/sessions/${sessionId}/labels`, {
      method: "POST",
      body: JSON.stringify({ labels }),
    });
  }

  async exportLabeled(sessionId: string): Promise<string> {
    const response = await this.fetchFn(
      `${this.base}/v1/sessions/${sessionId}/export`,
    );
    if (!response.ok) {
      throw new HttpError(response.status, "export failed");
    }
    return await response.text();
  }

  exportUrl(sessionId: string): string {
    return `${this.base}/v1/sessions/${sessionId}/export`;
  }
}
