/**
 * Entry point: pick annotator + sequence (query params or the picker),
 * then mount the comparison session.
 */

import { AnnotationApi } from './api.js';
import { SessionController } from './state.js';
import { SessionView } from './view.js';

export function mountSession(
  root: HTMLElement,
  api: AnnotationApi,
  sequenceId: string,
  annotatorId: string,
  doc: Document,
): SessionController {
  const view = new SessionView(root, doc);
  const controller = new SessionController(api, sequenceId, annotatorId, () => view.render());
  view.attach(controller);
  void controller.start();
  return controller;
}

async function showPicker(root: HTMLElement, api: AnnotationApi, doc: Document): Promise<void> {
  const sequences = await api.listSequences();
  root.textContent = '';
  const title = doc.createElement('h2');
  title.textContent = 'Pick a sequence';
  root.appendChild(title);

  const form = doc.createElement('form');
  form.className = 'picker';
  const nameInput = doc.createElement('input');
  nameInput.placeholder = 'Annotator ID';
  nameInput.required = true;
  form.appendChild(nameInput);
  const select = doc.createElement('select');
  for (const seq of sequences) {
    const option = doc.createElement('option');
    option.value = seq.sequence_id;
    option.textContent = `${seq.sequence_id} (${seq.dataset_label}, ${seq.n_pairs} pairs)`;
    select.appendChild(option);
  }
  form.appendChild(select);
  const go = doc.createElement('button');
  go.textContent = 'Start annotating';
  form.appendChild(go);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const params = new URLSearchParams({
      sequence: select.value,
      annotator: nameInput.value.trim(),
    });
    window.location.search = params.toString();
  });
  root.appendChild(form);
}

export function bootstrap(doc: Document): void {
  const root = doc.getElementById('root');
  if (root === null) return;
  const api = new AnnotationApi('');
  const params = new URLSearchParams(window.location.search);
  const sequence = params.get('sequence');
  const annotator = params.get('annotator');
  if (sequence && annotator) {
    mountSession(root as HTMLElement, api, sequence, annotator, doc);
  } else {
    void showPicker(root as HTMLElement, api, doc);
  }
}

if (typeof document !== 'undefined' && document.getElementById('root') !== null) {
  bootstrap(document);
}
