/** The annotation single-page app: read the panels side by side, toggle gap
 * labels (0-3, with the exclusivity rule enforced in the UI), write the
 * explanation, submit, advance. Keyboard flow: digits 0-3 toggle, Enter
 * submits (Ctrl+Enter from inside the explanation box).
 *
 * The server is the source of truth for submitted annotations; unsubmitted
 * work is kept as a local draft per record and survives reloads, validation
 * rejections, and network failures.
 */

import { ApiClient } from './api.js';
import {
  Draft,
  DraftStore,
  disabledLabels,
  emptySelection,
  isSubmittable,
  selectionToLabels,
  toggleLabel,
  validationError,
} from './state.js';
import { ALL_LABELS, LABEL_NAMES, Label, NextPayload, ProgressPayload } from './types.js';
import { highlightCitations, renderBadges, renderReferenceTabs } from './view.js';

type Screen =
  | { kind: 'loading' }
  | { kind: 'example'; payload: NextPayload }
  | { kind: 'exhausted' }
  | { kind: 'blocked'; detail: string }
  | { kind: 'network-error'; detail: string };

export class AnnotatorApp {
  private screen: Screen = { kind: 'loading' };
  private selection = emptySelection();
  private explanation = '';
  private inlineError: string | null = null;
  private progress: ProgressPayload | null = null;
  private keyHandler = (event: KeyboardEvent) => this.onKeydown(event);

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private drafts: DraftStore,
  ) {}

  async start(): Promise<void> {
    document.addEventListener('keydown', this.keyHandler);
    await this.refreshProgress();
    await this.loadNext();
  }

  stop(): void {
    document.removeEventListener('keydown', this.keyHandler);
  }

  private currentRecordId(): string | null {
    return this.screen.kind === 'example' ? this.screen.payload.record.record_id : null;
  }

  private async refreshProgress(): Promise<void> {
    try {
      this.progress = await this.api.progress();
    } catch {
      this.progress = null;
    }
  }

  private async loadNext(): Promise<void> {
    this.inlineError = null;
    try {
      const result = await this.api.next();
      if (result.kind === 'exhausted') {
        this.screen = { kind: 'exhausted' };
      } else if (result.kind === 'invalid') {
        this.screen = { kind: 'blocked', detail: result.detail };
      } else {
        this.screen = { kind: 'example', payload: result.payload };
        const draft = this.drafts.load(result.payload.record.record_id);
        this.selection = new Set(draft?.labels ?? []);
        this.explanation = draft?.explanation ?? '';
      }
    } catch (err) {
      this.screen = { kind: 'network-error', detail: String(err) };
    }
    this.render();
  }

  private saveDraft(): void {
    const recordId = this.currentRecordId();
    if (recordId === null) return;
    const draft: Draft = {
      labels: selectionToLabels(this.selection),
      explanation: this.explanation,
    };
    this.drafts.save(recordId, draft);
  }

  private toggle(label: Label): void {
    if (this.screen.kind !== 'example') return;
    this.selection = toggleLabel(this.selection, label);
    this.inlineError = null;
    this.saveDraft();
    this.render();
  }

  private async submit(): Promise<void> {
    if (this.screen.kind !== 'example') return;
    const recordId = this.screen.payload.record.record_id;
    const problem = validationError(this.selection, this.explanation);
    if (problem !== null) {
      this.inlineError = problem;
      this.render();
      return;
    }
    try {
      const result = await this.api.submit(
        recordId,
        selectionToLabels(this.selection),
        this.explanation,
      );
      if (result.kind === 'ok') {
        this.drafts.clear(recordId);
        this.selection = emptySelection();
        this.explanation = '';
        await this.refreshProgress();
        await this.loadNext();
        return;
      }
      // Server rejected (e.g. 422): show its message, keep the draft.
      this.inlineError = result.detail;
      this.saveDraft();
      this.render();
    } catch (err) {
      this.inlineError = `Network failure: ${String(err)}. Your draft is saved.`;
      this.saveDraft();
      this.render({ retry: true });
    }
  }

  private onKeydown(event: KeyboardEvent): void {
    const inTextarea =
      event.target instanceof HTMLElement && event.target.tagName === 'TEXTAREA';
    if (event.key === 'Enter' && (!inTextarea || event.ctrlKey || event.metaKey)) {
      event.preventDefault();
      void this.submit();
      return;
    }
    if (inTextarea) return;
    if (['0', '1', '2', '3'].includes(event.key)) {
      this.toggle(Number(event.key) as Label);
    }
  }

  // -------------------------------------------------------------------------
  // Rendering
  // -------------------------------------------------------------------------

  render(options: { retry?: boolean } = {}): void {
    this.root.textContent = '';
    this.root.append(this.renderHeader());
    switch (this.screen.kind) {
      case 'loading': {
        const p = document.createElement('p');
        p.id = 'loading';
        p.textContent = 'Loading…';
        this.root.append(p);
        break;
      }
      case 'exhausted':
        this.root.append(this.renderCompletion());
        break;
      case 'blocked':
        this.root.append(this.renderErrorPane(this.screen.detail, false));
        break;
      case 'network-error':
        this.root.append(this.renderErrorPane(this.screen.detail, true));
        break;
      case 'example':
        this.root.append(this.renderExample(this.screen.payload, options.retry === true));
        break;
    }
  }

  private renderHeader(): HTMLElement {
    const header = document.createElement('header');
    const title = document.createElement('h1');
    title.textContent = 'Gap annotation';
    header.append(title);

    const progressWrap = document.createElement('div');
    progressWrap.className = 'progress-wrap';
    const bar = document.createElement('div');
    bar.className = 'progress-track';
    const fill = document.createElement('div');
    fill.id = 'progress-bar';
    const completed = this.progress?.completed ?? 0;
    const total = this.progress?.total ?? 0;
    fill.style.width = total > 0 ? `${(100 * completed) / total}%` : '0%';
    bar.append(fill);

    const text = document.createElement('span');
    text.id = 'progress-text';
    text.textContent = `${completed}/${total}`;

    const balance = document.createElement('span');
    balance.id = 'balance-text';
    balance.textContent =
      this.progress?.balance == null
        ? 'balance —'
        : `balance ${this.progress.balance.toFixed(2)}`;

    progressWrap.append(bar, text, balance);
    header.append(progressWrap);
    return header;
  }

  private renderCompletion(): HTMLElement {
    const pane = document.createElement('section');
    pane.id = 'completion';
    const h2 = document.createElement('h2');
    h2.textContent = 'All examples labeled';
    const p = document.createElement('p');
    p.textContent = 'Every record in this set has an annotation. Export the results from the server.';
    pane.append(h2, p);
    return pane;
  }

  private renderErrorPane(detail: string, retryable: boolean): HTMLElement {
    const pane = document.createElement('section');
    pane.id = 'error-pane';
    const h2 = document.createElement('h2');
    h2.textContent = 'Cannot display example';
    const p = document.createElement('p');
    p.textContent = detail;
    pane.append(h2, p);
    if (retryable) {
      pane.append(this.renderRetryButton());
    }
    return pane;
  }

  private renderRetryButton(): HTMLButtonElement {
    const retry = document.createElement('button');
    retry.id = 'retry';
    retry.type = 'button';
    retry.textContent = 'Retry';
    retry.addEventListener('click', () => void this.loadNext());
    return retry;
  }

  private renderExample(payload: NextPayload, withRetry: boolean): HTMLElement {
    const main = document.createElement('main');
    const extraKeys = new Set(payload.coverage.extra);

    const badges = document.createElement('div');
    badges.id = 'badges';
    renderBadges(badges, payload.signals, payload.coverage);
    main.append(badges);

    const panels = document.createElement('div');
    panels.className = 'panels';
    panels.append(
      this.textPanel('panel-previous', 'Previous text',
        highlightCitations(payload.record.previous_text, payload.citations.previous_text, extraKeys)),
      this.textPanel('panel-generation', `Generation (${payload.record.model_name})`,
        highlightCitations(payload.record.generation, payload.citations.generation, extraKeys)),
      this.textPanel('panel-target', 'Target',
        highlightCitations(payload.record.target, payload.citations.target, extraKeys)),
    );

    const references = document.createElement('section');
    references.id = 'panel-references';
    references.className = 'panel';
    const refTitle = document.createElement('h3');
    refTitle.textContent = 'References';
    const refBody = document.createElement('div');
    renderReferenceTabs(refBody, payload.record.references);
    references.append(refTitle, refBody);
    panels.append(references);
    main.append(panels);

    main.append(this.renderControls(withRetry));
    return main;
  }

  private textPanel(id: string, title: string, body: DocumentFragment): HTMLElement {
    const panel = document.createElement('section');
    panel.id = id;
    panel.className = 'panel';
    const h3 = document.createElement('h3');
    h3.textContent = title;
    const div = document.createElement('div');
    div.className = 'panel-text';
    div.append(body);
    panel.append(h3, div);
    return panel;
  }

  private renderControls(withRetry: boolean): HTMLElement {
    const controls = document.createElement('section');
    controls.id = 'controls';

    const toggles = document.createElement('div');
    toggles.id = 'label-toggles';
    const disabled = disabledLabels(this.selection);
    for (const label of ALL_LABELS) {
      const button = document.createElement('button');
      button.type = 'button';
      button.className = 'label-toggle';
      button.dataset.label = String(label);
      button.textContent = `${label} · ${LABEL_NAMES[label]}`;
      button.disabled = disabled.has(label);
      button.classList.toggle('selected', this.selection.has(label));
      button.setAttribute('aria-pressed', String(this.selection.has(label)));
      button.addEventListener('click', () => this.toggle(label));
      toggles.append(button);
    }
    controls.append(toggles);

    const submit = document.createElement('button');
    submit.id = 'submit';
    submit.type = 'button';
    submit.textContent = 'Submit and next (Enter)';
    submit.disabled = !isSubmittable(this.selection, this.explanation);
    submit.addEventListener('click', () => void this.submit());

    const textarea = document.createElement('textarea');
    textarea.id = 'explanation';
    textarea.placeholder = 'Explanation (required for any gap label)…';
    textarea.value = this.explanation;
    textarea.addEventListener('input', () => {
      // No re-render here (it would drop focus); refresh the gate in place.
      this.explanation = textarea.value;
      this.saveDraft();
      submit.disabled = !isSubmittable(this.selection, this.explanation);
    });
    controls.append(textarea);

    if (this.inlineError !== null) {
      const error = document.createElement('p');
      error.id = 'server-error';
      error.className = 'inline-error';
      error.textContent = this.inlineError;
      controls.append(error);
    }

    const actions = document.createElement('div');
    actions.className = 'actions';
    actions.append(submit);
    if (withRetry) {
      actions.append(this.renderRetryButton());
    }
    controls.append(actions);
    return controls;
  }
}
