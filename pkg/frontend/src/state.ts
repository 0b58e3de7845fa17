/**
 * Session state machine for one annotator working through one sequence.
 *
 * The controller owns everything the view renders: the current pair
 * (always the server's next unanswered pair, never reordered client
 * side), the form being composed (overall choice, rubric sliders,
 * rationale), banners, and the running session summary.  A network
 * failure keeps the composed record intact and exposes a retry; a
 * conflict means the pair was already answered elsewhere, so the session
 * moves on.  Nothing judge-related ever enters this state.
 */

import { AnnotationApi, ConflictError, NetworkError, ValidationError } from './api.js';
import type { Choice, PairPayload, PreferenceRecordIn, ProgressInfo } from './types.js';
import { RUBRIC_DIMENSIONS, SLIDER_NEUTRAL } from './types.js';

export type Phase = 'loading' | 'annotating' | 'done' | 'fatal';

export interface Banner {
  kind: 'retry' | 'notice' | 'error';
  message: string;
}

export interface SessionSummary {
  answered: number;
  leftChoices: number;
  rightChoices: number;
}

function neutralRubric(): Record<string, number> {
  const rubric: Record<string, number> = {};
  for (const dimension of RUBRIC_DIMENSIONS) {
    rubric[dimension] = SLIDER_NEUTRAL;
  }
  return rubric;
}

export class SessionController {
  phase: Phase = 'loading';
  datasetLabel = '';
  pair: PairPayload | null = null;
  progress: ProgressInfo | null = null;
  choice: Choice | null = null;
  rubric: Record<string, number> = neutralRubric();
  rationale = '';
  banner: Banner | null = null;
  submitting = false;
  fatalMessage = '';
  readonly summary: SessionSummary = { answered: 0, leftChoices: 0, rightChoices: 0 };

  private pendingRecord: PreferenceRecordIn | null = null;

  constructor(
    private readonly api: AnnotationApi,
    readonly sequenceId: string,
    readonly annotatorId: string,
    private readonly onChange: () => void = () => {},
  ) {}

  async start(): Promise<void> {
    this.phase = 'loading';
    this.notify();
    try {
      const known = await this.api.listSequences();
      this.datasetLabel = known.find((s) => s.sequence_id === this.sequenceId)?.dataset_label ?? '';
      this.progress = await this.api.progress(this.sequenceId, this.annotatorId);
      await this.advance();
    } catch (err) {
      this.phase = 'fatal';
      this.fatalMessage = String(err instanceof Error ? err.message : err);
      this.notify();
    }
  }

  /** True once an overall choice exists and nothing is in flight. */
  canSubmit(): boolean {
    return this.phase === 'annotating' && this.pair !== null
      && this.choice !== null && !this.submitting;
  }

  setChoice(choice: Choice): void {
    if (this.phase !== 'annotating' || this.submitting) return;
    this.choice = choice;
    this.notify();
  }

  setRubric(dimension: string, value: number): void {
    if (!(dimension in this.rubric)) return;
    this.rubric[dimension] = value;
    this.notify();
  }

  setRationale(text: string): void {
    this.rationale = text;
    this.notify();
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || this.pair === null || this.choice === null) return;
    const record: PreferenceRecordIn = {
      pair_id: this.pair.pair_id,
      annotator_id: this.annotatorId,
      choice: this.choice,
      rubric: { ...this.rubric },
      rationale: this.rationale,
    };
    await this.send(record);
  }

  /** Re-send the record a network failure left behind. */
  async retry(): Promise<void> {
    if (this.pendingRecord === null || this.submitting) return;
    await this.send(this.pendingRecord);
  }

  private async send(record: PreferenceRecordIn): Promise<void> {
    this.submitting = true;
    this.pendingRecord = record;
    this.banner = null;
    this.notify();
    try {
      await this.api.submitRecord(this.sequenceId, record);
      this.summary.answered += 1;
      if (record.choice === 'left') this.summary.leftChoices += 1;
      else this.summary.rightChoices += 1;
      this.pendingRecord = null;
      this.submitting = false;
      this.resetForm();
      await this.advance();
    } catch (err) {
      this.submitting = false;
      if (err instanceof ConflictError) {
        // answered elsewhere: nothing to keep, move to the next pair
        this.pendingRecord = null;
        this.banner = { kind: 'notice', message: 'This pair was already answered; showing the next one.' };
        this.resetForm();
        await this.advance();
      } else if (err instanceof ValidationError) {
        // surface the server's message verbatim; the pair and form stay
        this.pendingRecord = null;
        this.banner = { kind: 'error', message: err.message };
        this.notify();
      } else if (err instanceof NetworkError) {
        // the entered choice is not lost; offer a retry
        this.banner = { kind: 'retry', message: 'Could not reach the server. Your choice is kept; retry when back online.' };
        this.notify();
      } else {
        throw err;
      }
    }
  }

  private resetForm(): void {
    this.choice = null;
    this.rubric = neutralRubric();
    this.rationale = '';
  }

  private async advance(): Promise<void> {
    const next = await this.api.nextPair(this.sequenceId, this.annotatorId);
    this.progress = await this.api.progress(this.sequenceId, this.annotatorId);
    if (next.done || next.pair === null) {
      this.phase = 'done';
      this.pair = null;
    } else {
      this.phase = 'annotating';
      this.pair = next.pair;
    }
    this.notify();
  }

  private notify(): void {
    this.onChange();
  }
}
