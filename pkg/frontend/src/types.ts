/**
 * Wire types for the annotation service API.
 *
 * Pair payloads deliberately contain nothing judge-related: the UI only
 * ever sees report ids, insight texts, and image URLs.
 */

export interface SequenceInfo {
  sequence_id: string;
  dataset_label: string;
  n_pairs: number;
}

export interface SidePayload {
  report_id: string;
  insight: string;
  image_url: string;
}

export interface PairPayload {
  pair_id: string;
  index: number;
  total: number;
  left: SidePayload;
  right: SidePayload;
}

export interface NextResponse {
  done: boolean;
  pair: PairPayload | null;
}

export interface ProgressInfo {
  answered: number;
  total: number;
}

export type Choice = 'left' | 'right';

export interface PreferenceRecordIn {
  pair_id: string;
  annotator_id: string;
  choice: Choice;
  rubric: Record<string, number>;
  rationale: string;
}

/** Rubric slider dimensions, mirrored from the service. */
export const RUBRIC_DIMENSIONS = [
  'Trustworthy/Plausible',
  'Complex',
  'Unexpectedness',
  'Actionability',
  'Domain Value',
  'Effectiveness',
  'Expressiveness',
] as const;

export type RubricDimension = (typeof RUBRIC_DIMENSIONS)[number];

/** Neutral midpoint on the 0-100 sliders. */
export const SLIDER_NEUTRAL = 50;
