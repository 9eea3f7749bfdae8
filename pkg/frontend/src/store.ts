/** Session state machine driving the annotation view.
 *
 * One store per browser tab / session. Labels are held client-side in
 * `pending` and only cleared once the server acknowledges the submission,
 * so a network failure or crash loses nothing. A 409 from the service
 * (outstanding batch or training in progress) triggers retries with
 * backoff rather than an error.
 */

import { ApiClient, ApiError, BusyError } from "./api";
import type {
  BatchResponse,
  DocPayload,
  ExplanationPayload,
  LabelValue,
  MetricsPayload,
  PendingLabel,
  SessionConfig,
  SessionSnapshot,
} from "./types";

export type Phase =
  | "idle"
  | "loading"
  | "labeling"
  | "submitting"
  | "training"
  | "done"
  | "offline"
  | "error";

export type ExplainMethod = "lime" | "shap" | "off";

export interface StoreState {
  phase: Phase;
  sessionId: string | null;
  iteration: number;
  batch: DocPayload[];
  currentIndex: number;
  pending: Map<string, PendingLabel>;
  snapshot: SessionSnapshot | null;
  metricsHistory: MetricsPayload[];
  curveCsv: string;
  explainMethod: ExplainMethod;
  explanation: ExplanationPayload | null;
  note: string;
  lastError: string;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export interface StoreOptions {
  /** Base backoff delay in ms for 409 retries (tests shrink this). */
  retryDelayMs?: number;
  maxRetries?: number;
}

export class SessionStore {
  state: StoreState = {
    phase: "idle",
    sessionId: null,
    iteration: 0,
    batch: [],
    currentIndex: 0,
    pending: new Map(),
    snapshot: null,
    metricsHistory: [],
    curveCsv: "",
    explainMethod: "off",
    explanation: null,
    note: "",
    lastError: "",
  };

  private listeners: Array<(state: StoreState) => void> = [];
  private explanationCache = new Map<string, ExplanationPayload>();
  private retryDelayMs: number;
  private maxRetries: number;

  constructor(
    private api: ApiClient,
    options: StoreOptions = {},
  ) {
    this.retryDelayMs = options.retryDelayMs ?? 500;
    this.maxRetries = options.maxRetries ?? 20;
  }

  subscribe(listener: (state: StoreState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(partial: Partial<StoreState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  get currentDoc(): DocPayload | null {
    return this.state.batch[this.state.currentIndex] ?? null;
  }

  get labelsComplete(): boolean {
    return (
      this.state.batch.length > 0 &&
      this.state.batch.every((doc) => this.state.pending.has(doc.id))
    );
  }

  async create(config: SessionConfig): Promise<void> {
    this.update({ phase: "loading" });
    try {
      const sessionId = await this.api.createSession(config);
      this.update({ sessionId });
      await this.refreshSnapshot();
      await this.loadBatch();
    } catch (error) {
      this.fail(error);
    }
  }

  /** Re-attach to an existing session (e.g. after a service restart). */
  async resume(sessionId: string): Promise<void> {
    this.update({ sessionId, phase: "loading" });
    try {
      const snapshot = await this.api.snapshot(sessionId);
      this.update({ snapshot, iteration: snapshot.iteration });
      if (snapshot.status === "done") {
        this.update({ phase: "done" });
        return;
      }
      await this.loadBatch();
    } catch (error) {
      this.fail(error);
    }
  }

  async refreshSnapshot(): Promise<void> {
    if (!this.state.sessionId) return;
    const snapshot = await this.api.snapshot(this.state.sessionId);
    this.update({ snapshot, iteration: snapshot.iteration, note: snapshot.note });
  }

  async loadBatch(): Promise<void> {
    if (!this.state.sessionId) return;
    this.update({ phase: "loading" });
    for (let attempt = 0; attempt <= this.maxRetries; attempt++) {
      try {
        const batch: BatchResponse = await this.api.nextBatch(this.state.sessionId);
        this.update({
          phase: "labeling",
          batch: batch.docs,
          iteration: batch.iteration,
          currentIndex: 0,
          explanation: null,
        });
        return;
      } catch (error) {
        if (error instanceof ApiError && error.status === 410) {
          this.update({ phase: "done", batch: [] });
          return;
        }
        if (error instanceof BusyError) {
          // training or an outstanding batch; show the state and back off
          this.update({ phase: "training", note: error.detail });
          await sleep(this.retryDelayMs * Math.min(attempt + 1, 8));
          continue;
        }
        this.fail(error);
        return;
      }
    }
    this.update({ phase: "error", lastError: "gave up waiting for the next batch" });
  }

  setLabel(docId: string, label: LabelValue, maybe: boolean): void {
    if (this.state.phase !== "labeling") return;
    if (maybe && label === "WeakATD") return; // Maybe modifies ATD / NonATD only
    const pending = new Map(this.state.pending);
    pending.set(docId, { doc_id: docId, label, maybe_flag: maybe });
    const nextUnlabeled = this.state.batch.findIndex((doc) => !pending.has(doc.id));
    this.update({
      pending,
      currentIndex: nextUnlabeled === -1 ? this.state.currentIndex : nextUnlabeled,
    });
  }

  selectDoc(index: number): void {
    if (index >= 0 && index < this.state.batch.length) {
      this.update({ currentIndex: index, explanation: null });
      void this.loadExplanation();
    }
  }

  /** Submit all pending labels; they stay client-side until acknowledged. */
  async submit(): Promise<void> {
    if (!this.state.sessionId || this.state.pending.size === 0) return;
    if (this.state.phase === "submitting") return;
    const labels = [...this.state.pending.values()];
    this.update({ phase: "submitting" });
    try {
      const response = await this.api.submitLabels(this.state.sessionId, labels);
      // acknowledged: now commit locally
      const metricsHistory = response.metrics
        ? [...this.state.metricsHistory, response.metrics]
        : this.state.metricsHistory;
      this.update({
        pending: new Map(),
        metricsHistory,
        note: response.note ?? "",
      });
      await this.refreshSnapshot();
      await this.refreshCurve();
      if (this.state.snapshot?.status === "done") {
        this.update({ phase: "done", batch: [] });
      } else if (response.retrained || this.state.snapshot?.issued === false) {
        await this.loadBatch();
      } else {
        this.update({ phase: "labeling" });
      }
    } catch (error) {
      if (error instanceof ApiError) {
        // the server rejected the payload; keep pending for correction
        this.update({ phase: "labeling", lastError: error.detail });
      } else {
        // network failure: offline banner, labels kept until acknowledged
        this.update({ phase: "offline", lastError: String(error) });
      }
    }
  }

  async retry(): Promise<void> {
    if (this.state.phase === "offline") {
      await this.submit();
    }
  }

  async setExplainMethod(method: ExplainMethod): Promise<void> {
    this.update({ explainMethod: method, explanation: null });
    await this.loadExplanation();
  }

  async loadExplanation(): Promise<void> {
    const doc = this.currentDoc;
    const method = this.state.explainMethod;
    if (!doc || method === "off" || !this.state.sessionId) return;
    const version = this.state.snapshot?.model_version ?? 0;
    if (version < 1) return;
    const key = `${version}:${doc.id}:${method}`;
    let payload = this.explanationCache.get(key);
    if (!payload) {
      try {
        payload = await this.api.explanation(this.state.sessionId, doc.id, method);
      } catch (error) {
        if (error instanceof ApiError && (error.status === 409 || error.status === 422)) {
          return; // no model yet or untokenizable doc; leave highlights off
        }
        throw error;
      }
      this.explanationCache.set(key, payload);
    }
    this.update({ explanation: payload });
  }

  async refreshCurve(): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const curveCsv = await this.api.learningCurve(this.state.sessionId);
      this.update({ curveCsv });
    } catch {
      // the chart is best-effort; labeling must not block on it
    }
  }

  private fail(error: unknown): void {
    this.update({
      phase: error instanceof ApiError ? "error" : "offline",
      lastError: error instanceof Error ? error.message : String(error),
    });
  }
}
