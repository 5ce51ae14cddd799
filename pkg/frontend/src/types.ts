/** Shared types for the annotation API payloads. */

export type Label = 0 | 1 | 2 | 3;

export const ALL_LABELS: readonly Label[] = [0, 1, 2, 3];

export const LABEL_NAMES: Record<Label, string> = {
  0: 'No gaps',
  1: 'Intrinsic gaps',
  2: 'Target mismatch',
  3: 'Citation content mismatch',
};

export interface CitationSpan {
  volume: number;
  reporter: string;
  first_page: number;
  pincite: number | null;
  court_year: string | null;
  start: number;
  end: number;
  low_confidence: boolean;
  key: string;
}

export interface CoverageReport {
  cited: string[];
  missing: string[];
  extra: string[];
}

export interface ScreeningSignals {
  repeated_sentences: { sentence: string; count: number }[];
  repeated_ngrams: { ngram: string; count: number }[];
  structural_markers: { marker: string; start: number; end: number }[];
  word_count: number;
  word_count_in_bounds: boolean;
}

export interface RecordPayload {
  record_id: string;
  model_name: string;
  previous_text: string;
  generation: string;
  target: string;
  required_citations: string[];
  references: { cite_key: string; text: string }[];
}

export interface NextPayload {
  index: number;
  total: number;
  record: RecordPayload;
  signals: ScreeningSignals;
  coverage: CoverageReport;
  citations: {
    generation: CitationSpan[];
    target: CitationSpan[];
    previous_text: CitationSpan[];
  };
}

export interface ProgressPayload {
  completed: number;
  total: number;
  label_counts: Record<string, number>;
  label_distribution: Record<string, number> | null;
  balance: number | null;
}

export interface StoredAnnotation {
  record_id: string;
  label: number[];
  explanation: string;
  annotator_id: string;
  annotated_at: string;
}

/** Minimal structural check before rendering; anything off-shape gets a
 * blocking error pane instead of a half-rendered view. */
export function isNextPayload(value: unknown): value is NextPayload {
  if (typeof value !== 'object' || value === null) return false;
  const v = value as Record<string, unknown>;
  const record = v.record as Record<string, unknown> | undefined;
  return (
    typeof v.index === 'number' &&
    typeof v.total === 'number' &&
    typeof record === 'object' &&
    record !== null &&
    typeof record.record_id === 'string' &&
    typeof record.generation === 'string' &&
    typeof record.target === 'string' &&
    typeof record.previous_text === 'string' &&
    Array.isArray(record.references) &&
    typeof v.signals === 'object' &&
    typeof v.coverage === 'object' &&
    typeof v.citations === 'object'
  );
}
