// Typed client for the generation/annotation service. The fetch function is
// injectable so tests can substitute a stub service.

import { AnnotationSessionPayload, GenerationRequestPayload,
         GenerationResponsePayload, TaskPayload } from './types.js';

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ status: number; json(): Promise<unknown>; text(): Promise<string> }>;

export class ServiceError extends Error {
  readonly status: number;
  readonly field: string | undefined;

  constructor(status: number, message: string, field?: string) {
    super(message);
    this.status = status;
    this.field = field;
  }

  /** 503 means the sampling queue is full; worth retrying shortly. */
  get retryable(): boolean {
    return this.status === 503;
  }
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn ?? (globalThis.fetch as unknown as FetchLike);
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (resp.status !== 200) {
      let detail = '';
      let field: string | undefined;
      try {
        const body = (await resp.json()) as { error?: string; field?: string; detail?: string };
        detail = body.detail || body.error || '';
        field = body.field;
      } catch {
        detail = await resp.text().catch(() => '');
      }
      throw new ServiceError(resp.status, detail || `request failed (${resp.status})`, field);
    }
    return (await resp.json()) as T;
  }

  async generate(payload: GenerationRequestPayload): Promise<GenerationResponsePayload> {
    return this.post<GenerationResponsePayload>('/v1/generate', payload);
  }

  async submitAnnotation(payload: AnnotationSessionPayload): Promise<string> {
    const body = await this.post<{ session_id: string }>('/v1/annotations', payload);
    return body.session_id;
  }

  async fetchAnnotation(sessionId: string): Promise<AnnotationSessionPayload> {
    const resp = await this.fetchFn(`${this.base}/v1/annotations/${sessionId}`);
    if (resp.status !== 200) {
      throw new ServiceError(resp.status, `unknown session ${sessionId}`);
    }
    return (await resp.json()) as AnnotationSessionPayload;
  }

  /** Next unannotated reference image; null when the pool is drained. */
  async nextTask(): Promise<TaskPayload | null> {
    const resp = await this.fetchFn(`${this.base}/v1/tasks/next`);
    if (resp.status === 204) return null;
    if (resp.status !== 200) {
      throw new ServiceError(resp.status, 'task fetch failed');
    }
    return (await resp.json()) as TaskPayload;
  }

  async health(): Promise<{ status: string; model_loaded: boolean }> {
    const resp = await this.fetchFn(`${this.base}/health`);
    if (resp.status !== 200) {
      throw new ServiceError(resp.status, 'health check failed');
    }
    return (await resp.json()) as { status: string; model_loaded: boolean };
  }
}
