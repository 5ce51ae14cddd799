/** Typed client for the annotation service API, with an injectable fetch so
 * tests can stub the server. */

import {
  Label,
  NextPayload,
  ProgressPayload,
  StoredAnnotation,
  isNextPayload,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export type NextResult =
  | { kind: 'example'; payload: NextPayload }
  | { kind: 'exhausted' }
  | { kind: 'invalid'; detail: string };

export type SubmitResult =
  | { kind: 'ok'; annotation: StoredAnnotation; superseded: boolean }
  | { kind: 'rejected'; status: number; detail: string };

export class ApiClient {
  constructor(
    private fetchFn: FetchLike,
    private annotatorId: string,
    private base = '',
  ) {}

  private url(path: string, params: Record<string, string> = {}): string {
    const query = new URLSearchParams({ annotator_id: this.annotatorId, ...params });
    return `${this.base}${path}?${query.toString()}`;
  }

  /** Fetch the next unlabeled example; distinguishes exhaustion and schema
   * mismatches from transport failures (which reject the promise). */
  async next(): Promise<NextResult> {
    const resp = await this.fetchFn(this.url('/api/next'));
    if (resp.status === 404) {
      return { kind: 'exhausted' };
    }
    if (!resp.ok) {
      return { kind: 'invalid', detail: `unexpected status ${resp.status}` };
    }
    const body: unknown = await resp.json();
    if (!isNextPayload(body)) {
      return { kind: 'invalid', detail: 'response does not match the expected schema' };
    }
    return { kind: 'example', payload: body };
  }

  async submit(recordId: string, labels: Label[], explanation: string): Promise<SubmitResult> {
    const resp = await this.fetchFn(`${this.base}/api/annotations`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({
        annotator_id: this.annotatorId,
        record_id: recordId,
        label: labels,
        explanation,
      }),
    });
    const body = (await resp.json()) as Record<string, unknown>;
    if (resp.ok) {
      return {
        kind: 'ok',
        annotation: body.annotation as StoredAnnotation,
        superseded: Boolean(body.superseded),
      };
    }
    return {
      kind: 'rejected',
      status: resp.status,
      detail: typeof body.detail === 'string' ? body.detail : 'submission rejected',
    };
  }

  async progress(): Promise<ProgressPayload> {
    const resp = await this.fetchFn(this.url('/api/progress'));
    if (!resp.ok) {
      throw new Error(`progress request failed with status ${resp.status}`);
    }
    return (await resp.json()) as ProgressPayload;
  }
}
