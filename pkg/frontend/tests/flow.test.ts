import { afterEach, beforeEach, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { AnnotatorApp } from '../src/app.js';
import { MemoryDraftStore } from '../src/state.js';
import { bankruptcyExample, plainExample } from './fixtures.js';
import { StubServer } from './stub_server.js';

let root: HTMLElement;
let app: AnnotatorApp | null = null;

beforeEach(() => {
  document.body.innerHTML = '';
  root = document.createElement('div');
  document.body.append(root);
});

afterEach(() => {
  app?.stop();
  app = null;
});

async function flush(): Promise<void> {
  for (let i = 0; i < 4; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

async function startApp(server: StubServer, drafts = new MemoryDraftStore()) {
  const api = new ApiClient(server.fetch, 'expert-1');
  app = new AnnotatorApp(root, api, drafts);
  await app.start();
  await flush();
  return { api, drafts };
}

function clickToggle(label: number): void {
  const button = root.querySelector<HTMLButtonElement>(`.label-toggle[data-label="${label}"]`);
  expect(button, `toggle ${label}`).not.toBeNull();
  button!.click();
}

function setExplanation(text: string): void {
  const textarea = root.querySelector<HTMLTextAreaElement>('#explanation');
  expect(textarea).not.toBeNull();
  textarea!.value = text;
  textarea!.dispatchEvent(new Event('input', { bubbles: true }));
}

function clickSubmit(): void {
  root.querySelector<HTMLButtonElement>('#submit')!.click();
}

describe('rendering an example', () => {
  it('populates every panel and highlights all three citations', async () => {
    const server = new StubServer([bankruptcyExample(), plainExample()]);
    await startApp(server);

    expect(root.querySelector('#panel-generation')!.textContent).toContain('Butner');
    expect(root.querySelector('#panel-target')!.textContent).toContain('MacDonald');
    expect(root.querySelector('#panel-previous')!.textContent).toContain('Claim # 13');

    const marks = root.querySelectorAll('#panel-generation mark.cite');
    expect(marks.length).toBe(3);
    const keys = [...marks].map((m) => (m as HTMLElement).dataset.key);
    expect(keys).toEqual(['440 U.S. 48', '114 B.R. 326', '117 B.R. 15']);
    expect(marks[0].textContent).toBe('440 U.S. 48, 55');

    const tabs = root.querySelectorAll('#panel-references .tab');
    expect([...tabs].map((t) => t.textContent)).toEqual([
      '440 U.S. 48',
      '114 B.R. 326',
      '117 B.R. 15',
    ]);
    expect(root.querySelector('#badges')!.textContent).toContain('citations covered');
  });

  it('shows "none" when the record has no references', async () => {
    const server = new StubServer([plainExample()]);
    await startApp(server);
    expect(root.querySelector('#panel-references .references-none')!.textContent).toBe('none');
  });

  it('switches reference tabs on click', async () => {
    const server = new StubServer([bankruptcyExample()]);
    await startApp(server);
    const tabs = root.querySelectorAll<HTMLButtonElement>('#panel-references .tab');
    const panels = root.querySelectorAll<HTMLElement>('#panel-references .tab-panel');
    expect(panels[0].hidden).toBe(false);
    expect(panels[1].hidden).toBe(true);
    tabs[1].click();
    expect(panels[0].hidden).toBe(true);
    expect(panels[1].hidden).toBe(false);
  });

  it('shows the completion screen when exhausted', async () => {
    const server = new StubServer([]);
    await startApp(server);
    expect(root.querySelector('#completion')).not.toBeNull();
    expect(root.querySelector('#panel-generation')).toBeNull();
  });

  it('shows a blocking error pane on schema mismatch', async () => {
    const server = new StubServer([bankruptcyExample()]);
    const brokenFetch: typeof server.fetch = async (input, init) => {
      const url = new URL(input, 'http://stub.local');
      if (url.pathname === '/api/next') {
        return new Response(JSON.stringify({ wrong: 'shape' }), { status: 200 });
      }
      return server.fetch(input, init);
    };
    const api = new ApiClient(brokenFetch, 'expert-1');
    app = new AnnotatorApp(root, api, new MemoryDraftStore());
    await app.start();
    await flush();
    expect(root.querySelector('#error-pane')).not.toBeNull();
    expect(root.querySelector('#error-pane')!.textContent).toContain('schema');
    expect(root.querySelector('#submit')).toBeNull();
  });
});

describe('label toggles in the view', () => {
  it('selecting 0 disables the gap toggles and vice versa', async () => {
    const server = new StubServer([bankruptcyExample()]);
    await startApp(server);

    clickToggle(0);
    for (const gap of [1, 2, 3]) {
      const button = root.querySelector<HTMLButtonElement>(`.label-toggle[data-label="${gap}"]`)!;
      expect(button.disabled).toBe(true);
    }
    // Keyboard shortcut for a disabled label is inert too.
    document.dispatchEvent(new KeyboardEvent('keydown', { key: '3', bubbles: true }));
    await flush();
    expect(
      root.querySelector<HTMLButtonElement>('.label-toggle[data-label="3"]')!.classList.contains('selected'),
    ).toBe(false);

    clickToggle(0); // deselect
    clickToggle(2);
    expect(root.querySelector<HTMLButtonElement>('.label-toggle[data-label="0"]')!.disabled).toBe(true);
  });

  it('digit keys toggle labels outside the textarea', async () => {
    const server = new StubServer([bankruptcyExample()]);
    await startApp(server);
    document.dispatchEvent(new KeyboardEvent('keydown', { key: '2', bubbles: true }));
    await flush();
    expect(
      root.querySelector('.label-toggle[data-label="2"]')!.classList.contains('selected'),
    ).toBe(true);
  });

  it('typing digits in the explanation box does not toggle labels', async () => {
    const server = new StubServer([bankruptcyExample()]);
    await startApp(server);
    const textarea = root.querySelector<HTMLTextAreaElement>('#explanation')!;
    textarea.dispatchEvent(new KeyboardEvent('keydown', { key: '2', bubbles: true }));
    await flush();
    expect(
      root.querySelector('.label-toggle[data-label="2"]')!.classList.contains('selected'),
    ).toBe(false);
  });
});

describe('submission flow', () => {
  it('label [2] plus explanation advances and lands in the export', async () => {
    const server = new StubServer([bankruptcyExample(), plainExample()]);
    await startApp(server);

    clickToggle(2);
    setExplanation('The generation elaborates each citation; the target chain cites.');
    clickSubmit();
    await flush();

    // Advanced to the second record.
    expect(root.querySelector('#panel-generation')!.textContent).toContain('359 F.2d 292');
    expect(root.querySelector('#progress-text')!.textContent).toBe('1/2');
    expect(root.querySelector('#balance-text')!.textContent).toContain('balance 0.94');

    // The export now holds exactly one line with label [2].
    const lines = server.exportLines();
    expect(lines.length).toBe(1);
    const row = JSON.parse(lines[0]);
    expect(row.record_id).toBe('bankr-torres');
    expect(row.label).toEqual([2]);
  });

  it('Enter submits from outside the textarea', async () => {
    const server = new StubServer([bankruptcyExample(), plainExample()]);
    await startApp(server);
    clickToggle(0);
    document.dispatchEvent(new KeyboardEvent('keydown', { key: 'Enter', bubbles: true }));
    await flush();
    expect(server.exportLines().length).toBe(1);
    expect(JSON.parse(server.exportLines()[0]).label).toEqual([0]);
  });

  it('a server 422 shows the message inline and preserves the draft', async () => {
    const server = new StubServer([bankruptcyExample(), plainExample()]);
    const { drafts } = await startApp(server);

    clickToggle(2);
    setExplanation('draft that must survive');
    server.failNextSubmit = { status: 422, detail: 'exclusivity violation: rejected by server' };
    clickSubmit();
    await flush();

    const error = root.querySelector('#server-error');
    expect(error).not.toBeNull();
    expect(error!.textContent).toContain('rejected by server');
    // Still on the same record with the draft intact.
    expect(root.querySelector('#panel-generation')!.textContent).toContain('Butner');
    expect(root.querySelector<HTMLTextAreaElement>('#explanation')!.value).toBe(
      'draft that must survive',
    );
    expect(
      root.querySelector('.label-toggle[data-label="2"]')!.classList.contains('selected'),
    ).toBe(true);
    expect(drafts.load('bankr-torres')).toEqual({
      labels: [2],
      explanation: 'draft that must survive',
    });
    expect(server.exportLines().length).toBe(0);

    // A corrected resubmit goes through.
    clickSubmit();
    await flush();
    expect(server.exportLines().length).toBe(1);
  });

  it('a network failure offers retry and loses no draft', async () => {
    const server = new StubServer([bankruptcyExample(), plainExample()]);
    const { drafts } = await startApp(server);

    clickToggle(3);
    setExplanation('kept through the outage');
    server.dropNextSubmit = true;
    clickSubmit();
    await flush();

    expect(root.querySelector('#server-error')!.textContent).toContain('Network failure');
    expect(root.querySelector('#retry')).not.toBeNull();
    expect(drafts.load('bankr-torres')).toEqual({
      labels: [3],
      explanation: 'kept through the outage',
    });

    // Retry reloads the same record with the draft restored.
    root.querySelector<HTMLButtonElement>('#retry')!.click();
    await flush();
    expect(root.querySelector('#panel-generation')!.textContent).toContain('Butner');
    expect(root.querySelector<HTMLTextAreaElement>('#explanation')!.value).toBe(
      'kept through the outage',
    );
    clickSubmit();
    await flush();
    expect(server.exportLines().length).toBe(1);
  });

  it('invalid client states never reach the server', async () => {
    const server = new StubServer([bankruptcyExample()]);
    await startApp(server);
    // No selection: submit button disabled and Enter shows the local message.
    expect(root.querySelector<HTMLButtonElement>('#submit')!.disabled).toBe(true);
    document.dispatchEvent(new KeyboardEvent('keydown', { key: 'Enter', bubbles: true }));
    await flush();
    expect(server.submitCalls).toBe(0);
    expect(root.querySelector('#server-error')!.textContent).toContain('at least one label');
  });

  it('a gap label without explanation is blocked client-side', async () => {
    const server = new StubServer([bankruptcyExample()]);
    await startApp(server);
    clickToggle(1);
    expect(root.querySelector<HTMLButtonElement>('#submit')!.disabled).toBe(true);
    document.dispatchEvent(new KeyboardEvent('keydown', { key: 'Enter', bubbles: true }));
    await flush();
    expect(server.submitCalls).toBe(0);
    expect(root.querySelector('#server-error')!.textContent).toContain('explanation');
  });
});

describe('session continuity', () => {
  it('a fresh app instance resumes from server state after a submit', async () => {
    const server = new StubServer([bankruptcyExample(), plainExample()]);
    await startApp(server);
    clickToggle(0);
    clickSubmit();
    await flush();
    app!.stop();

    // Simulated refresh: new app over the same server.
    root.textContent = '';
    await startApp(server);
    expect(root.querySelector('#progress-text')!.textContent).toBe('1/2');
    expect(root.querySelector('#panel-generation')!.textContent).toContain('359 F.2d 292');
  });

  it('an unsubmitted draft is restored after a refresh', async () => {
    const server = new StubServer([bankruptcyExample()]);
    const drafts = new MemoryDraftStore();
    await startApp(server, drafts);
    clickToggle(2);
    setExplanation('half-finished thought');
    app!.stop();

    root.textContent = '';
    await startApp(server, drafts);
    expect(root.querySelector<HTMLTextAreaElement>('#explanation')!.value).toBe(
      'half-finished thought',
    );
    expect(
      root.querySelector('.label-toggle[data-label="2"]')!.classList.contains('selected'),
    ).toBe(true);
  });
});
