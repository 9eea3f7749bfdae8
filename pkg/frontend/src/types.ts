/** Payload types for the annotation service /v1 JSON API. */

export type LabelValue = "ATD" | "WeakATD" | "NonATD";

export interface DocPayload {
  id: string;
  summary: string;
  description: string;
  /** Unified summary+description text; byte spans index its UTF-8 form. */
  text: string;
  tokens: string[];
  spans: [number, number][];
  predicted_probs?: Record<string, number>;
}

export interface BatchResponse {
  docs: DocPayload[];
  iteration: number;
}

export interface WeightEntry {
  token: string;
  /** Token position of the first occurrence. */
  index: number;
  weight: number;
  /** Every token position this weight covers. */
  occurrences: number[];
}

export interface ExplanationPayload {
  doc_id: string;
  method: "lime" | "shap";
  predicted: Record<string, number>;
  base_value: number | null;
  weights: WeightEntry[];
  config_hash: string;
  target: string;
  model_version: number;
  tokens: string[];
  spans: [number, number][];
}

export interface SessionSnapshot {
  session_id: string;
  corpus: string;
  status: string;
  strategy: string;
  iteration: number;
  model_version: number;
  labeled_count: number;
  pool_count: number;
  awaiting: string[];
  pending: string[];
  issued: boolean;
  note: string;
}

export interface MetricsPayload {
  precision: number;
  recall: number;
  f1: number;
}

export interface SubmitResponse {
  accepted: number;
  retrained: boolean;
  metrics?: MetricsPayload;
  note?: string;
}

export interface PendingLabel {
  doc_id: string;
  label: LabelValue;
  maybe_flag: boolean;
}

export interface SessionConfig {
  corpus_ref?: string;
  strategy?: string;
  seed_size?: number;
  batch_size?: number;
  rng_seed?: number;
  merge_mode?: string;
  annotator?: string;
}
