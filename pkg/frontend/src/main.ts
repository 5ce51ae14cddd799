/** Browser bootstrap: wire the app to window.fetch and localStorage. The
 * annotator id comes from the ?annotator= query parameter. */

import { ApiClient } from './api.js';
import { AnnotatorApp } from './app.js';
import { LocalStorageDraftStore } from './state.js';

const params = new URLSearchParams(window.location.search);
const annotatorId = params.get('annotator') ?? 'expert-1';

const root = document.getElementById('app');
if (root === null) {
  throw new Error('missing #app mount point');
}

const api = new ApiClient((input, init) => window.fetch(input, init), annotatorId);
const app = new AnnotatorApp(root, api, new LocalStorageDraftStore(window.localStorage));
void app.start();
