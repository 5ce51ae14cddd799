/** DOM builders for the annotation view: citation highlighting, reference
 * tabs, and screening badges. Kept free of app state so they can be tested
 * in isolation. */

import { CitationSpan, CoverageReport, ScreeningSignals } from './types.js';

/** Wrap each citation span in a <mark>, preserving the surrounding text.
 * Spans are non-overlapping and ordered by construction. */
export function highlightCitations(
  text: string,
  citations: CitationSpan[],
  extraKeys: Set<string>,
): DocumentFragment {
  const fragment = document.createDocumentFragment();
  let cursor = 0;
  const ordered = [...citations].sort((a, b) => a.start - b.start);
  for (const cite of ordered) {
    if (cite.start < cursor) continue;
    if (cite.start > cursor) {
      fragment.append(document.createTextNode(text.slice(cursor, cite.start)));
    }
    const mark = document.createElement('mark');
    mark.className = 'cite';
    if (extraKeys.has(cite.key)) mark.classList.add('cite-extra');
    if (cite.low_confidence) mark.classList.add('cite-low-confidence');
    mark.dataset.key = cite.key;
    mark.title = extraKeys.has(cite.key) ? `${cite.key} (not in the required set)` : cite.key;
    mark.textContent = text.slice(cite.start, cite.end);
    fragment.append(mark);
    cursor = cite.end;
  }
  if (cursor < text.length) {
    fragment.append(document.createTextNode(text.slice(cursor)));
  }
  return fragment;
}

/** References rendered as tabs labeled by citation key; empty set shows a
 * "none" placeholder. */
export function renderReferenceTabs(
  container: HTMLElement,
  references: { cite_key: string; text: string }[],
): void {
  container.textContent = '';
  if (references.length === 0) {
    const none = document.createElement('p');
    none.className = 'references-none';
    none.textContent = 'none';
    container.append(none);
    return;
  }
  const tabBar = document.createElement('div');
  tabBar.className = 'tab-bar';
  const panels: HTMLElement[] = [];
  const buttons: HTMLButtonElement[] = [];

  references.forEach((ref, i) => {
    const button = document.createElement('button');
    button.type = 'button';
    button.className = 'tab';
    button.textContent = ref.cite_key;
    button.dataset.key = ref.cite_key;
    const panel = document.createElement('div');
    panel.className = 'tab-panel';
    panel.textContent = ref.text;
    panel.hidden = i !== 0;
    if (i === 0) button.classList.add('active');
    button.addEventListener('click', () => {
      panels.forEach((p, j) => {
        p.hidden = j !== i;
        buttons[j].classList.toggle('active', j === i);
      });
    });
    tabBar.append(button);
    buttons.push(button);
    panels.push(panel);
  });
  container.append(tabBar, ...panels);
}

function badge(text: string, cls: string): HTMLElement {
  const el = document.createElement('span');
  el.className = `badge ${cls}`;
  el.textContent = text;
  return el;
}

/** Advisory screening badges: repeats, structural markers, word count,
 * and citation coverage problems. Never more than hints. */
export function renderBadges(
  container: HTMLElement,
  signals: ScreeningSignals,
  coverage: CoverageReport,
): void {
  container.textContent = '';
  if (signals.repeated_sentences.length > 0) {
    container.append(
      badge(`repeated sentences: ${signals.repeated_sentences.length}`, 'badge-warn'),
    );
  }
  if (signals.repeated_ngrams.length > 0) {
    container.append(badge(`repeated n-grams: ${signals.repeated_ngrams.length}`, 'badge-warn'));
  }
  for (const marker of signals.structural_markers) {
    container.append(badge(`marker: ${marker.marker}`, 'badge-warn'));
  }
  const words = badge(
    `${signals.word_count} words`,
    signals.word_count_in_bounds ? 'badge-ok' : 'badge-warn',
  );
  container.append(words);
  if (coverage.missing.length > 0) {
    container.append(badge(`missing cites: ${coverage.missing.join(', ')}`, 'badge-error'));
  }
  if (coverage.extra.length > 0) {
    container.append(badge(`extra cites: ${coverage.extra.join(', ')}`, 'badge-warn'));
  }
  if (coverage.missing.length === 0 && coverage.extra.length === 0) {
    container.append(badge('citations covered', 'badge-ok'));
  }
}
