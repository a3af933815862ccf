/**
 * Thin typed client for the assessment service.  Every number shown in the
 * console comes through here; nothing is recomputed client-side.
 */

import type {
  Assessment,
  DeltaTableResponse,
  EvidencePayload,
  QueueEntry,
  SampleResponse,
  SessionInfo,
  WhatifResponse,
} from './types.js';

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

/** status 0: the service never answered (connectivity banner territory). */
export const UNREACHABLE = 0;

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface WhatifQuery {
  scheme?: string;
  window?: string;
}

export class ApiClient {
  private base: string;
  private fetchImpl: FetchLike;
  token: string | null = null;

  constructor(base: string, fetchImpl?: FetchLike) {
    this.base = base.replace(/\/+$/, '');
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request(method: string, path: string, body?: unknown): Promise<string> {
    const headers: Record<string, string> = { Accept: 'application/json' };
    if (body !== undefined) headers['Content-Type'] = 'application/json';
    if (this.token) headers['X-Session-Token'] = this.token;

    let response: Response;
    try {
      response = await this.fetchImpl(`${this.base}${path}`, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(UNREACHABLE, 'unreachable', `service unreachable: ${String(err)}`);
    }

    const text = await response.text();
    if (!response.ok) {
      let code = 'error';
      let message = text || response.statusText;
      try {
        const parsed = JSON.parse(text);
        if (parsed && typeof parsed.code === 'string') code = parsed.code;
        if (parsed && typeof parsed.message === 'string') message = parsed.message;
      } catch {
        // non-JSON error body: keep the raw text
      }
      throw new ApiError(response.status, code, message);
    }
    return text;
  }

  private async json<T>(method: string, path: string, body?: unknown): Promise<T> {
    return JSON.parse(await this.request(method, path, body)) as T;
  }

  async openSession(assessor: string): Promise<SessionInfo> {
    const info = await this.json<SessionInfo>('POST', '/v1/session', { assessor });
    this.token = info.token;
    return info;
  }

  queue(): Promise<{ entries: QueueEntry[] }> {
    return this.json('GET', '/v1/queue');
  }

  assessment(hospital: string, university: string): Promise<Assessment> {
    return this.json('GET', `/v1/assessments/${hospital}/${university}`);
  }

  putEvidence(hospital: string, university: string, payload: EvidencePayload): Promise<Assessment> {
    return this.json('PUT', `/v1/assessments/${hospital}/${university}/evidence`, payload);
  }

  drawSample(
    hospital: string,
    university: string,
    body: { version: number; n: number; seed: number },
  ): Promise<SampleResponse> {
    return this.json('POST', `/v1/assessments/${hospital}/${university}/sample`, body);
  }

  recordVerdicts(
    hospital: string,
    university: string,
    body: { version: number; verdicts: [string, boolean][] },
  ): Promise<Assessment> {
    return this.json('POST', `/v1/assessments/${hospital}/${university}/verdicts`, body);
  }

  classify(hospital: string, university: string, version: number): Promise<Assessment> {
    return this.json('POST', `/v1/assessments/${hospital}/${university}/classify`, { version });
  }

  override(
    hospital: string,
    university: string,
    body: { version: number; verdict: string; justification: string },
  ): Promise<Assessment> {
    return this.json('POST', `/v1/assessments/${hospital}/${university}/override`, body);
  }

  /** Returns the parsed body and the raw bytes; the panel renders from
   * `data`, parity checks compare against `raw`. */
  async whatif(
    university: string,
    hospital: string,
    query: WhatifQuery = {},
  ): Promise<{ data: WhatifResponse; raw: string }> {
    const params = new URLSearchParams();
    if (query.scheme) params.set('scheme', query.scheme);
    if (query.window) params.set('window', query.window);
    const suffix = params.size > 0 ? `?${params.toString()}` : '';
    const raw = await this.request('GET', `/v1/whatif/${university}/${hospital}${suffix}`);
    return { data: JSON.parse(raw) as WhatifResponse, raw };
  }

  deltaTable(query: WhatifQuery = {}): Promise<DeltaTableResponse> {
    const params = new URLSearchParams();
    if (query.scheme) params.set('scheme', query.scheme);
    if (query.window) params.set('window', query.window);
    const suffix = params.size > 0 ? `?${params.toString()}` : '';
    return this.json('GET', `/v1/reports/delta-table${suffix}`);
  }
}
