import { describe, expect, it } from 'vitest';

import { AnnotationApi, ConflictError, NetworkError, ValidationError } from '../src/api.js';
import { SessionController } from '../src/state.js';
import type { NextResponse, PairPayload, PreferenceRecordIn, ProgressInfo } from '../src/types.js';
import { RUBRIC_DIMENSIONS, SLIDER_NEUTRAL } from '../src/types.js';

function pair(id: number): PairPayload {
  return {
    pair_id: `p${id}`,
    index: id,
    total: 3,
    left: { report_id: `rL${id}`, insight: `left insight ${id}`, image_url: `/images/l${id}.png` },
    right: { report_id: `rR${id}`, insight: `right insight ${id}`, image_url: `/images/r${id}.png` },
  };
}

/** Scripted stand-in for the HTTP API: serves pairs in order, records posts. */
class FakeApi {
  posted: PreferenceRecordIn[] = [];
  failNext: Error | null = null;
  private cursor = 0;

  constructor(private readonly pairs: PairPayload[]) {}

  async listSequences() {
    return [{ sequence_id: 'seq1', dataset_label: 'toy', n_pairs: this.pairs.length }];
  }

  async nextPair(): Promise<NextResponse> {
    if (this.cursor >= this.pairs.length) return { done: true, pair: null };
    return { done: false, pair: this.pairs[this.cursor] };
  }

  async progress(): Promise<ProgressInfo> {
    return { answered: this.cursor, total: this.pairs.length };
  }

  async submitRecord(_seq: string, record: PreferenceRecordIn): Promise<void> {
    if (this.failNext !== null) {
      const err = this.failNext;
      this.failNext = null;
      throw err;
    }
    this.posted.push(record);
    this.cursor += 1;
  }
}

function controllerWith(pairs: PairPayload[]): { controller: SessionController; api: FakeApi } {
  const api = new FakeApi(pairs);
  const controller = new SessionController(api as unknown as AnnotationApi, 'seq1', 'ann1');
  return { controller, api };
}

describe('SessionController', () => {
  it('loads the first pair in server order and starts without a choice', async () => {
    const { controller } = controllerWith([pair(0), pair(1)]);
    await controller.start();
    expect(controller.phase).toBe('annotating');
    expect(controller.pair?.pair_id).toBe('p0');
    expect(controller.choice).toBeNull();
    expect(controller.canSubmit()).toBe(false);
  });

  it('refuses to submit until an overall choice is made', async () => {
    const { controller, api } = controllerWith([pair(0)]);
    await controller.start();
    await controller.submit();
    expect(api.posted).toHaveLength(0);
    controller.setChoice('left');
    expect(controller.canSubmit()).toBe(true);
    await controller.submit();
    expect(api.posted).toHaveLength(1);
  });

  it('submits explicit neutral slider values when untouched', async () => {
    const { controller, api } = controllerWith([pair(0)]);
    await controller.start();
    controller.setChoice('right');
    await controller.submit();
    const record = api.posted[0];
    expect(Object.keys(record.rubric)).toHaveLength(RUBRIC_DIMENSIONS.length);
    for (const dimension of RUBRIC_DIMENSIONS) {
      expect(record.rubric[dimension]).toBe(SLIDER_NEUTRAL);
    }
  });

  it('carries adjusted sliders and rationale, then resets the form', async () => {
    const { controller, api } = controllerWith([pair(0), pair(1)]);
    await controller.start();
    controller.setChoice('left');
    controller.setRubric('Complex', 80);
    controller.setRationale('sharper axis labels');
    await controller.submit();
    expect(api.posted[0].rubric['Complex']).toBe(80);
    expect(api.posted[0].rationale).toBe('sharper axis labels');
    // next pair: fresh form
    expect(controller.pair?.pair_id).toBe('p1');
    expect(controller.choice).toBeNull();
    expect(controller.rubric['Complex']).toBe(SLIDER_NEUTRAL);
    expect(controller.rationale).toBe('');
  });

  it('finishes with a session summary after the last pair', async () => {
    const pairs = [pair(0), pair(1), pair(2)];
    const { controller } = controllerWith(pairs);
    await controller.start();
    for (const side of ['left', 'right', 'left'] as const) {
      controller.setChoice(side);
      await controller.submit();
    }
    expect(controller.phase).toBe('done');
    expect(controller.summary).toEqual({ answered: 3, leftChoices: 2, rightChoices: 1 });
  });

  it('keeps the entered choice and offers retry on network failure', async () => {
    const { controller, api } = controllerWith([pair(0)]);
    await controller.start();
    controller.setChoice('left');
    controller.setRationale('kept text');
    api.failNext = new NetworkError('offline');
    await controller.submit();
    expect(controller.banner?.kind).toBe('retry');
    expect(controller.pair?.pair_id).toBe('p0');
    expect(controller.choice).toBe('left');
    expect(controller.rationale).toBe('kept text');
    expect(api.posted).toHaveLength(0);
    await controller.retry();
    expect(api.posted).toHaveLength(1);
    expect(api.posted[0].rationale).toBe('kept text');
    expect(controller.phase).toBe('done');
  });

  it('moves on with a notice when the pair was already answered', async () => {
    const { controller, api } = controllerWith([pair(0), pair(1)]);
    await controller.start();
    controller.setChoice('left');
    api.failNext = new ConflictError('already answered');
    await controller.submit();
    expect(controller.banner?.kind).toBe('notice');
    expect(api.posted).toHaveLength(0);
    expect(controller.phase).toBe('annotating');
  });

  it('surfaces validation errors verbatim and retains the pair', async () => {
    const { controller, api } = controllerWith([pair(0)]);
    await controller.start();
    controller.setChoice('right');
    api.failNext = new ValidationError('unknown rubric dimensions: [Vibes]');
    await controller.submit();
    expect(controller.banner?.kind).toBe('error');
    expect(controller.banner?.message).toBe('unknown rubric dimensions: [Vibes]');
    expect(controller.pair?.pair_id).toBe('p0');
    expect(controller.choice).toBe('right');
  });

  it('ignores double submits while one is in flight', async () => {
    const { controller, api } = controllerWith([pair(0)]);
    await controller.start();
    controller.setChoice('left');
    const first = controller.submit();
    const second = controller.submit(); // canSubmit() is false while in flight
    await Promise.all([first, second]);
    expect(api.posted).toHaveLength(1);
  });

  it('fails fatally when the sequence does not exist', async () => {
    const api = {
      listSequences: async () => [],
      progress: async () => {
        throw new ValidationError('unknown sequence nope');
      },
      nextPair: async () => ({ done: true, pair: null }),
      submitRecord: async () => undefined,
    };
    const controller = new SessionController(api as unknown as AnnotationApi, 'nope', 'ann');
    await controller.start();
    expect(controller.phase).toBe('fatal');
    expect(controller.fatalMessage).toContain('unknown sequence');
  });
});
