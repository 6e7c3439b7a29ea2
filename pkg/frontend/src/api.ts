/** Typed client for the session service. The fetch implementation is
 * injectable so tests can script transports; the client never computes or
 * rewrites server values. */

import type {
  ApiErrorBody,
  GraphPayload,
  MetricsPayload,
  SessionCreated,
  SessionInfo,
  TurnOutcome,
} from './types.js';

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly fields: Record<string, string>;

  constructor(status: number, body: ApiErrorBody | null) {
    super(body?.error?.message ?? `request failed with status ${status}`);
    this.status = status;
    this.code = body?.error?.code ?? 'unknown';
    this.fields = body?.error?.fields ?? {};
  }

  get isBusy(): boolean {
    return this.status === 409;
  }
}

export interface CreateSessionRequest {
  config?: Record<string, unknown>;
  seed?: number;
  canvas?: [number, number];
  initial_state?: unknown;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, '');
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  imageUrl(uri: string): string {
    return `${this.base}/images/${uri}`;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { 'Content-Type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.base}${path}`, init);
    const text = await response.text();
    let parsed: unknown = null;
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = null;
      }
    }
    if (!response.ok) {
      throw new ApiError(response.status, parsed as ApiErrorBody | null);
    }
    return parsed as T;
  }

  createSession(request: CreateSessionRequest): Promise<SessionCreated> {
    return this.request('POST', '/sessions', request);
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.request('GET', `/sessions/${sessionId}`);
  }

  runTurn(sessionId: string, instruction: string, dsl?: string): Promise<TurnOutcome> {
    const body: Record<string, unknown> = { instruction };
    if (dsl !== undefined && dsl !== '') {
      body.dsl = dsl;
    }
    return this.request('POST', `/sessions/${sessionId}/turns`, body);
  }

  getGraph(sessionId: string): Promise<GraphPayload> {
    return this.request('GET', `/sessions/${sessionId}/graph`);
  }

  undo(sessionId: string, targetUri?: string): Promise<{ head_uri: string }> {
    const body = targetUri ? { target_uri: targetUri } : {};
    return this.request('POST', `/sessions/${sessionId}/undo`, body);
  }

  getMetrics(sessionId: string): Promise<MetricsPayload> {
    return this.request('GET', `/sessions/${sessionId}/metrics`);
  }
}
