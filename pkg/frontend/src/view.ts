/**
 * DOM view: two chart+insight panels side by side, rubric sliders, a
 * rationale box, and the overall Left/Right choice.
 *
 * Never renders anything judge-related; the payloads it consumes contain
 * none.  Re-renders only on structural changes (new pair, choice,
 * banner, phase) so typing in the rationale box or dragging sliders
 * never rebuilds the form under the annotator.
 */

import type { SessionController } from './state.js';
import type { Choice, SidePayload } from './types.js';
import { RUBRIC_DIMENSIONS } from './types.js';

export class SessionView {
  private controller: SessionController | null = null;
  private lastKey = '';

  constructor(
    private readonly root: HTMLElement,
    private readonly doc: Document,
  ) {}

  attach(controller: SessionController): void {
    this.controller = controller;
    this.doc.addEventListener('keydown', (event: KeyboardEvent) => {
      if (this.controller === null || this.controller.phase !== 'annotating') return;
      const target = event.target as HTMLElement | null;
      if (target && target.tagName === 'TEXTAREA') return;
      if (event.key === 'ArrowLeft') this.controller.setChoice('left');
      else if (event.key === 'ArrowRight') this.controller.setChoice('right');
      else if (event.key === 'Enter' && this.controller.canSubmit()) {
        void this.controller.submit();
      }
    });
    this.render();
  }

  /** Structural state fingerprint; unchanged fingerprint skips the rebuild. */
  private renderKey(c: SessionController): string {
    return [
      c.phase,
      c.pair?.pair_id ?? '',
      c.choice ?? '',
      c.banner ? `${c.banner.kind}:${c.banner.message}` : '',
      String(c.submitting),
      String(c.progress?.answered ?? -1),
      c.fatalMessage,
    ].join('|');
  }

  render(): void {
    const c = this.controller;
    if (c === null) return;
    const key = this.renderKey(c);
    if (key === this.lastKey) return;
    this.lastKey = key;

    this.root.textContent = '';
    this.root.appendChild(this.header(c));
    if (c.banner !== null) this.root.appendChild(this.bannerBox(c));
    if (c.phase === 'loading') {
      this.root.appendChild(this.el('p', 'status', 'Loading…'));
    } else if (c.phase === 'fatal') {
      this.root.appendChild(this.el('p', 'status error', c.fatalMessage));
    } else if (c.phase === 'done') {
      this.root.appendChild(this.completion(c));
    } else if (c.pair !== null) {
      this.root.appendChild(this.comparePanel(c));
      this.root.appendChild(this.evaluationPanel(c));
    }
  }

  private header(c: SessionController): HTMLElement {
    const header = this.el('header', 'session-header');
    header.appendChild(this.el('span', 'annotator', `Annotator: ${c.annotatorId}`));
    if (c.datasetLabel) {
      header.appendChild(this.el('span', 'dataset', `Dataset: ${c.datasetLabel}`));
    }
    header.appendChild(this.el('span', 'sequence', `Sequence: ${c.sequenceId}`));
    const progress = c.progress ? `${c.progress.answered} / ${c.progress.total}` : '…';
    header.appendChild(this.el('span', 'progress', `Progress: ${progress}`));
    return header;
  }

  private bannerBox(c: SessionController): HTMLElement {
    const banner = c.banner!;
    const box = this.el('div', `banner banner-${banner.kind}`, banner.message);
    if (banner.kind === 'retry') {
      const retry = this.el('button', 'retry-button', 'Retry') as HTMLButtonElement;
      retry.addEventListener('click', () => void c.retry());
      box.appendChild(retry);
    }
    return box;
  }

  private comparePanel(c: SessionController): HTMLElement {
    const section = this.el('section', 'compare');
    section.appendChild(this.reportCard(c, 'left', c.pair!.left));
    section.appendChild(this.reportCard(c, 'right', c.pair!.right));
    return section;
  }

  private reportCard(c: SessionController, side: Choice, payload: SidePayload): HTMLElement {
    const chosen = c.choice === side ? ' chosen' : '';
    const card = this.el('article', `report ${side}${chosen}`);
    card.appendChild(this.el('h3', 'side-title', side === 'left' ? 'Left report' : 'Right report'));
    const figure = this.el('div', 'chart');
    if (payload.image_url) {
      const img = this.doc.createElement('img') as HTMLImageElement;
      img.src = payload.image_url;
      img.alt = `chart for the ${side} report`;
      img.addEventListener('error', () => {
        figure.textContent = '';
        figure.appendChild(this.el('div', 'chart-placeholder error', 'Chart image unavailable'));
      });
      figure.appendChild(img);
    } else {
      figure.appendChild(this.el('div', 'chart-placeholder error', 'Chart image unavailable'));
    }
    card.appendChild(figure);
    card.appendChild(this.el('p', 'insight', payload.insight));
    return card;
  }

  private evaluationPanel(c: SessionController): HTMLElement {
    const section = this.el('section', 'evaluation');

    const sliders = this.el('div', 'sliders');
    for (const dimension of RUBRIC_DIMENSIONS) {
      const row = this.el('label', 'slider-row');
      row.appendChild(this.el('span', 'slider-name', dimension));
      const input = this.doc.createElement('input') as HTMLInputElement;
      input.type = 'range';
      input.min = '0';
      input.max = '100';
      input.value = String(c.rubric[dimension]);
      input.dataset.dimension = dimension;
      const valueLabel = this.el('span', 'slider-value', input.value);
      input.addEventListener('input', () => {
        valueLabel.textContent = input.value;
        c.setRubric(dimension, Number(input.value));
      });
      row.appendChild(input);
      row.appendChild(valueLabel);
      sliders.appendChild(row);
    }
    section.appendChild(sliders);

    const rationale = this.doc.createElement('textarea') as HTMLTextAreaElement;
    rationale.className = 'rationale';
    rationale.placeholder = 'Explain your choice';
    rationale.value = c.rationale;
    rationale.addEventListener('input', () => c.setRationale(rationale.value));
    section.appendChild(rationale);

    const choices = this.el('div', 'choices');
    choices.appendChild(this.choiceButton(c, 'left', 'Left is better'));
    choices.appendChild(this.choiceButton(c, 'right', 'Right is better'));
    section.appendChild(choices);

    const submit = this.el('button', 'submit', c.submitting ? 'Submitting…' : 'Submit') as HTMLButtonElement;
    submit.disabled = !c.canSubmit();
    submit.addEventListener('click', () => void c.submit());
    section.appendChild(submit);
    return section;
  }

  private choiceButton(c: SessionController, side: Choice, label: string): HTMLElement {
    const selected = c.choice === side ? ' selected' : '';
    const button = this.el('button', `choice choice-${side}${selected}`, label) as HTMLButtonElement;
    button.addEventListener('click', () => c.setChoice(side));
    return button;
  }

  private completion(c: SessionController): HTMLElement {
    const box = this.el('section', 'completion');
    box.appendChild(this.el('h2', 'done-title', 'Sequence complete'));
    const total = c.progress?.total ?? c.summary.answered;
    box.appendChild(this.el('p', 'done-progress', `All ${total} pairs answered.`));
    box.appendChild(
      this.el(
        'p',
        'done-summary',
        `This session: ${c.summary.answered} submitted `
        + `(${c.summary.leftChoices} left, ${c.summary.rightChoices} right).`,
      ),
    );
    return box;
  }

  private el(tag: string, className: string, text?: string): HTMLElement {
    const node = this.doc.createElement(tag);
    node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }
}
