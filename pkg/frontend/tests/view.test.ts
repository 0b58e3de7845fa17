// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from 'vitest';

import { AnnotationApi } from '../src/api.js';
import { SessionController } from '../src/state.js';
import { SessionView } from '../src/view.js';
import type { NextResponse, PairPayload, PreferenceRecordIn, ProgressInfo } from '../src/types.js';
import { RUBRIC_DIMENSIONS } from '../src/types.js';

function pairFixture(): PairPayload {
  return {
    pair_id: 'p0',
    index: 0,
    total: 10,
    left: { report_id: 'rA', insight: 'left says papers rise', image_url: '/images/rA.png' },
    right: { report_id: 'rB', insight: 'right says papers fall', image_url: '' },
  };
}

class OnePairApi {
  posted: PreferenceRecordIn[] = [];
  private done = false;

  async listSequences() {
    return [{ sequence_id: 'seq1', dataset_label: 'toy', n_pairs: 10 }];
  }

  async nextPair(): Promise<NextResponse> {
    return this.done ? { done: true, pair: null } : { done: false, pair: pairFixture() };
  }

  async progress(): Promise<ProgressInfo> {
    return { answered: this.done ? 10 : 9, total: 10 };
  }

  async submitRecord(_seq: string, record: PreferenceRecordIn): Promise<void> {
    this.posted.push(record);
    this.done = true;
  }
}

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

describe('SessionView', () => {
  let root: HTMLElement;
  let api: OnePairApi;
  let controller: SessionController;

  beforeEach(async () => {
    document.body.innerHTML = '<div id="root"></div>';
    root = document.getElementById('root') as HTMLElement;
    api = new OnePairApi();
    const view = new SessionView(root, document);
    controller = new SessionController(
      api as unknown as AnnotationApi, 'seq1', 'ann1', () => view.render(),
    );
    view.attach(controller);
    await controller.start();
    await flush();
  });

  it('renders both report panels with insight text and progress', () => {
    const insights = [...root.querySelectorAll('.insight')].map((n) => n.textContent);
    expect(insights).toEqual(['left says papers rise', 'right says papers fall']);
    expect(root.querySelector('.progress')?.textContent).toContain('9 / 10');
    expect(root.querySelector('.dataset')?.textContent).toContain('toy');
    expect(root.querySelectorAll('.slider-row')).toHaveLength(RUBRIC_DIMENSIONS.length);
  });

  it('keeps submit disabled until an overall choice is made', () => {
    const submit = root.querySelector('.submit') as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
    (root.querySelector('.choice-left') as HTMLButtonElement).click();
    const enabled = root.querySelector('.submit') as HTMLButtonElement;
    expect(enabled.disabled).toBe(false);
    expect(root.querySelector('.choice-left')?.className).toContain('selected');
  });

  it('shows a placeholder with an error state for a missing image', () => {
    // right side has no image URL at all
    const right = root.querySelector('.report.right') as HTMLElement;
    expect(right.querySelector('.chart-placeholder')?.className).toContain('error');
    // left side falls back when the image fails to load
    const img = root.querySelector('.report.left img') as HTMLImageElement;
    img.dispatchEvent(new Event('error'));
    const left = root.querySelector('.report.left') as HTMLElement;
    expect(left.querySelector('.chart-placeholder')?.textContent).toContain('unavailable');
  });

  it('sliders default to the neutral midpoint and write through', () => {
    const slider = root.querySelector('input[type="range"]') as HTMLInputElement;
    expect(slider.value).toBe('50');
    slider.value = '72';
    slider.dispatchEvent(new Event('input'));
    expect(controller.rubric[RUBRIC_DIMENSIONS[0]]).toBe(72);
  });

  it('typing a rationale does not rebuild the form', () => {
    const textarea = root.querySelector('.rationale') as HTMLTextAreaElement;
    textarea.value = 'because the trend is clearer';
    textarea.dispatchEvent(new Event('input'));
    expect(controller.rationale).toBe('because the trend is clearer');
    // same node is still attached: no re-render happened
    expect(root.querySelector('.rationale')).toBe(textarea);
  });

  it('arrow keys pick a side', () => {
    document.dispatchEvent(new KeyboardEvent('keydown', { key: 'ArrowRight' }));
    expect(controller.choice).toBe('right');
    document.dispatchEvent(new KeyboardEvent('keydown', { key: 'ArrowLeft' }));
    expect(controller.choice).toBe('left');
  });

  it('submitting advances to the completion screen with a session summary', async () => {
    (root.querySelector('.choice-right') as HTMLButtonElement).click();
    (root.querySelector('.submit') as HTMLButtonElement).click();
    await flush();
    await flush();
    expect(api.posted).toHaveLength(1);
    expect(root.querySelector('.completion')).not.toBeNull();
    expect(root.querySelector('.done-summary')?.textContent).toContain('1 submitted');
    expect(root.querySelector('.done-summary')?.textContent).toContain('1 right');
  });

  it('never renders judge or score fields', () => {
    const text = (root.textContent ?? '').toLowerCase();
    expect(text).not.toContain('judge');
    expect(text).not.toContain('score');
  });
});
