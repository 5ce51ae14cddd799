/** Pure label-selection and draft logic, mirrored from the server's rules.
 *
 * The toggle model enforces the label-set exclusivity client-side: while
 * "no gaps" (0) is selected the gap toggles are disabled, and while any gap
 * label is selected the "no gaps" toggle is disabled. Everything reachable
 * through `toggleLabel` is therefore a state the server will accept once an
 * explanation requirement is met.
 */

import { ALL_LABELS, Label } from './types.js';

export type Selection = ReadonlySet<Label>;

export const GAP_LABELS: readonly Label[] = [1, 2, 3];

export function emptySelection(): Set<Label> {
  return new Set<Label>();
}

/** Labels whose toggles are inert given the current selection. */
export function disabledLabels(selected: Selection): Set<Label> {
  const out = new Set<Label>();
  if (selected.has(0)) {
    for (const gap of GAP_LABELS) out.add(gap);
  }
  if (GAP_LABELS.some((gap) => selected.has(gap))) {
    out.add(0);
  }
  return out;
}

/** Flip one label, ignoring the request when that toggle is disabled. */
export function toggleLabel(selected: Selection, label: Label): Set<Label> {
  const next = new Set(selected);
  if (disabledLabels(selected).has(label)) {
    return next;
  }
  if (next.has(label)) {
    next.delete(label);
  } else {
    next.add(label);
  }
  return next;
}

export function hasGapLabel(selected: Selection): boolean {
  return GAP_LABELS.some((gap) => selected.has(gap));
}

/** The server's label validation, re-stated: non-empty, 0 exclusive. */
export function selectionError(selected: Selection): string | null {
  if (selected.size === 0) {
    return 'Select at least one label.';
  }
  if (selected.has(0) && selected.size > 1) {
    return 'Label 0 (no gaps) cannot co-occur with gap labels.';
  }
  return null;
}

/** The server's explanation rule: required whenever a gap label is present. */
export function explanationErrorFor(selected: Selection, explanation: string): string | null {
  if (hasGapLabel(selected) && explanation.trim() === '') {
    return 'An explanation is required when any gap label is selected.';
  }
  return null;
}

export function validationError(selected: Selection, explanation: string): string | null {
  return selectionError(selected) ?? explanationErrorFor(selected, explanation);
}

export function isSubmittable(selected: Selection, explanation: string): boolean {
  return validationError(selected, explanation) === null;
}

export function selectionToLabels(selected: Selection): Label[] {
  return ALL_LABELS.filter((label) => selected.has(label));
}

// ---------------------------------------------------------------------------
// Draft persistence: unsubmitted work survives reloads and failed submits.
// ---------------------------------------------------------------------------

export interface Draft {
  labels: Label[];
  explanation: string;
}

export interface DraftStore {
  load(recordId: string): Draft | null;
  save(recordId: string, draft: Draft): void;
  clear(recordId: string): void;
}

export class MemoryDraftStore implements DraftStore {
  private drafts = new Map<string, Draft>();

  load(recordId: string): Draft | null {
    const draft = this.drafts.get(recordId);
    return draft ? { labels: [...draft.labels], explanation: draft.explanation } : null;
  }

  save(recordId: string, draft: Draft): void {
    this.drafts.set(recordId, { labels: [...draft.labels], explanation: draft.explanation });
  }

  clear(recordId: string): void {
    this.drafts.delete(recordId);
  }
}

export class LocalStorageDraftStore implements DraftStore {
  constructor(private storage: Storage, private prefix = 'gapcheck-draft:') {}

  load(recordId: string): Draft | null {
    const raw = this.storage.getItem(this.prefix + recordId);
    if (raw === null) return null;
    try {
      const parsed = JSON.parse(raw) as Draft;
      if (!Array.isArray(parsed.labels) || typeof parsed.explanation !== 'string') return null;
      return parsed;
    } catch {
      return null;
    }
  }

  save(recordId: string, draft: Draft): void {
    this.storage.setItem(this.prefix + recordId, JSON.stringify(draft));
  }

  clear(recordId: string): void {
    this.storage.removeItem(this.prefix + recordId);
  }
}
