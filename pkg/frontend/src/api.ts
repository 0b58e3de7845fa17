/**
 * Thin typed client over the annotation service HTTP API.
 *
 * Failures are split into three kinds the session logic treats
 * differently: conflicts (pair already answered -> move on), validation
 * rejections (surface the server's message, keep the pair), and network
 * failures (keep everything, offer retry).
 */

import type { NextResponse, PreferenceRecordIn, ProgressInfo, SequenceInfo } from './types.js';

export class ConflictError extends Error {}

export class ValidationError extends Error {}

export class NetworkError extends Error {}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path);
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (!response.ok) {
      throw new ValidationError(await describeFailure(response));
    }
    return (await response.json()) as T;
  }

  listSequences(): Promise<SequenceInfo[]> {
    return this.get('/api/sequences');
  }

  nextPair(sequenceId: string, annotatorId: string): Promise<NextResponse> {
    const query = new URLSearchParams({ annotator_id: annotatorId });
    return this.get(`/api/sequences/${encodeURIComponent(sequenceId)}/next?${query}`);
  }

  progress(sequenceId: string, annotatorId: string): Promise<ProgressInfo> {
    const query = new URLSearchParams({ annotator_id: annotatorId });
    return this.get(`/api/sequences/${encodeURIComponent(sequenceId)}/progress?${query}`);
  }

  async submitRecord(sequenceId: string, record: PreferenceRecordIn): Promise<void> {
    let response: Response;
    try {
      response = await this.fetchImpl(
        `${this.baseUrl}/api/sequences/${encodeURIComponent(sequenceId)}/records`,
        {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify(record),
        },
      );
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (response.status === 409) {
      throw new ConflictError(await describeFailure(response));
    }
    if (!response.ok) {
      throw new ValidationError(await describeFailure(response));
    }
  }
}

async function describeFailure(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (body.detail !== undefined) {
      return typeof body.detail === 'string' ? body.detail : JSON.stringify(body.detail);
    }
    return JSON.stringify(body);
  } catch {
    return `HTTP ${response.status}`;
  }
}
