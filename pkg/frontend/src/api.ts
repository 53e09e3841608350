/** Typed client for the training service.
 *
 * Every rating submission carries a fresh idempotency token; transient
 * network failures are retried with the SAME token, so the server applies
 * each rating at most once no matter how flaky the connection is. Only one
 * rating request may be in flight per client at a time.
 */

import type {
  EvaluationForm,
  ModelSummary,
  Progress,
  RatingResponse,
  SavedModel,
  SessionCreated,
  SessionDetail,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export interface ApiClientOptions {
  fetchFn?: FetchLike;
  tokenGen?: () => string;
  /** Total attempts per rating submission, first try included. */
  maxAttempts?: number;
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body: unknown = await response.json();
    if (body && typeof body === "object" && "detail" in body) {
      detail = JSON.stringify((body as { detail: unknown }).detail);
    }
  } catch {
    // keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  private readonly fetchFn: FetchLike;
  private readonly tokenGen: () => string;
  private readonly maxAttempts: number;
  private ratingInFlight = false;

  constructor(
    readonly baseUrl: string = "",
    options: ApiClientOptions = {},
  ) {
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.tokenGen = options.tokenGen ?? (() => crypto.randomUUID());
    this.maxAttempts = options.maxAttempts ?? 3;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  createSession(
    config: Record<string, unknown> = {},
    hyperparams: Record<string, unknown> = {},
  ): Promise<SessionCreated> {
    return this.request("POST", "/sessions", { config, hyperparams });
  }

  getSession(sessionId: string): Promise<SessionDetail> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  getProgress(sessionId: string): Promise<Progress & { session_id: string }> {
    return this.request("GET", `/sessions/${sessionId}/progress`);
  }

  /** Submit one rating; retries transient failures with an unchanged token. */
  async submitRating(sessionId: string, rating: number): Promise<RatingResponse> {
    if (this.ratingInFlight) {
      throw new Error("a rating request is already in flight");
    }
    this.ratingInFlight = true;
    const token = this.tokenGen();
    try {
      let lastFailure: unknown;
      for (let attempt = 0; attempt < this.maxAttempts; attempt += 1) {
        try {
          return await this.request<RatingResponse>(
            "POST",
            `/sessions/${sessionId}/rating`,
            { rating, token },
          );
        } catch (failure) {
          if (failure instanceof ApiError) {
            throw failure; // the server answered; retrying cannot help
          }
          lastFailure = failure;
        }
      }
      throw lastFailure;
    } finally {
      this.ratingInFlight = false;
    }
  }

  saveModel(name: string, sessionId: string): Promise<SavedModel> {
    return this.request("POST", `/models/${name}/save`, { session_id: sessionId });
  }

  listModels(): Promise<{ models: ModelSummary[] }> {
    return this.request("GET", "/models");
  }

  createSessionFromModel(
    name: string,
    hyperparams: Record<string, unknown> = {},
  ): Promise<SessionCreated> {
    return this.request("POST", `/sessions/from-model/${name}`, { hyperparams });
  }

  submitEvaluation(
    sessionId: string,
    form: EvaluationForm,
  ): Promise<{ id: number; session_id: string }> {
    return this.request("POST", `/sessions/${sessionId}/evaluation`, form);
  }

  midiUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/track.mid`;
  }

  eventsUrl(sessionId: string): string {
    const base = this.baseUrl === "" && typeof location !== "undefined"
      ? `${location.protocol}//${location.host}`
      : this.baseUrl;
    return `${base.replace(/^http/, "ws")}/sessions/${sessionId}/events`;
  }
}
