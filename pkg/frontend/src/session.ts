// Session state machine: stages the human's decisions, submits them,
// and follows the server through retrains to the next ambiguous batch.
//
// The view never invents counts: everything displayed mirrors the most
// recent server status. A decision is either acknowledged by the server
// or left visibly flagged on its row.

import {
  ApiClient,
  ConflictError,
  Label,
  PendingMessage,
  Schedule,
  SessionStatus,
} from "./api.js";

export type RowState =
  | "undecided"
  | "decided"
  | "submitting"
  | "acknowledged"
  | "conflict"
  | "failed";

export interface Row {
  message: PendingMessage;
  decision: Label | null;
  state: RowState;
  /** true once a submission carrying this row reached the wire; a later
   *  409 for it then means "the server already has it". */
  attempted: boolean;
  note: string | null;
}

export type Phase = "idle" | "labeling" | "retraining" | "complete";

export interface SessionClientOptions {
  submitMode?: "row" | "batch";
  pollIntervalMs?: number;
  pollAttempts?: number;
}

export class SessionClient {
  status: SessionStatus | null = null;
  rows: Row[] = [];
  phase: Phase = "idle";
  banner: string | null = null;
  /** highest model version ever reported; the view never shows it dropping */
  modelVersion = 0;
  versionHistory: number[] = [];

  private listeners: Array<() => void> = [];
  private submitMode: "row" | "batch";
  private pollIntervalMs: number;
  private pollAttempts: number;

  constructor(private api: ApiClient, options: SessionClientOptions = {}) {
    this.submitMode = options.submitMode ?? "row";
    this.pollIntervalMs = options.pollIntervalMs ?? 300;
    this.pollAttempts = options.pollAttempts ?? 100;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  private setStatus(status: SessionStatus): void {
    this.status = status;
    if (status.model_version > this.modelVersion) {
      this.modelVersion = status.model_version;
      this.versionHistory.push(status.model_version);
    }
    this.phase = status.complete ? "complete" : this.phase;
  }

  get sessionId(): string {
    if (!this.status) throw new Error("no session yet");
    return this.status.session_id;
  }

  async start(seed?: number, schedule?: Schedule): Promise<void> {
    const status = await this.guarded(() => this.api.createSession(seed, schedule));
    this.setStatus(status);
    this.versionHistory = [status.model_version];
    this.phase = "labeling";
    await this.loadBatch();
  }

  async attach(sessionId: string): Promise<void> {
    const status = await this.guarded(() => this.api.getStatus(sessionId));
    this.setStatus(status);
    this.versionHistory = [status.model_version];
    this.phase = status.complete ? "complete" : "labeling";
    if (!status.complete) await this.loadBatch();
    this.notify();
  }

  /** Reload status and the pending batch from the server (server order kept). */
  async refresh(): Promise<void> {
    const status = await this.guarded(() => this.api.getStatus(this.sessionId));
    this.setStatus(status);
    if (!status.complete) await this.loadBatch();
    this.notify();
  }

  private async loadBatch(): Promise<void> {
    const batch = await this.guarded(() => this.api.getBatch(this.sessionId));
    const staged = new Map(this.rows.map((r) => [r.message.id, r]));
    this.rows = batch.messages.map((message) => {
      const old = staged.get(message.id);
      return old && old.state !== "acknowledged"
        ? { ...old, message }
        : { message, decision: null, state: "undecided", attempted: false, note: null };
    });
    this.notify();
  }

  decide(id: string, label: Label): void {
    const row = this.rowById(id);
    if (row.state === "acknowledged" || row.state === "submitting") return;
    row.decision = label;
    row.state = "decided";
    row.note = null;
    this.notify();
  }

  /** Undo is only possible before the row has been submitted. */
  undo(id: string): void {
    const row = this.rowById(id);
    if (row.state === "decided" || row.state === "failed" || row.state === "conflict") {
      row.decision = null;
      row.state = "undecided";
      row.note = null;
      this.notify();
    }
  }

  decidedRows(): Row[] {
    return this.rows.filter((r) => r.state === "decided" || r.state === "failed");
  }

  /**
   * Submit every staged decision, then advance:
   * - partial batch: counts update, same batch stays on screen;
   * - batch complete: poll status until the model version moves (or the
   *   session completes), then pull the next batch.
   */
  async submitAndAdvance(): Promise<void> {
    if (!this.status) throw new Error("no session yet");
    const versionBefore = this.status.model_version;
    const toSend = this.decidedRows();
    if (toSend.length === 0) return;

    if (this.submitMode === "row") {
      for (const row of toSend) {
        await this.submitRows([row]);
      }
    } else {
      await this.submitRows(toSend);
    }
    this.banner = null;

    const status = this.status;
    if (!status) return;
    if (status.complete) {
      this.phase = "complete";
      this.notify();
      return;
    }
    if (status.pending_count === 0 || this.rows.every((r) => r.state === "acknowledged")) {
      // batch went in: wait for the retrain to surface, then fetch new work
      this.phase = "retraining";
      this.notify();
      await this.pollUntilAdvanced(versionBefore);
      if (this.status && !this.status.complete) {
        this.phase = "labeling";
        await this.loadBatch();
      }
    } else {
      // partial batch: drop acknowledged rows by re-reading the server's
      // pending list (staged decisions on the rest survive the merge)
      await this.loadBatch();
    }
    this.notify();
  }

  private async submitRows(rows: Row[]): Promise<void> {
    const payload = rows.map((row) => ({
      id: row.message.id,
      label: row.decision as Label,
    }));
    for (const row of rows) {
      row.state = "submitting";
      row.attempted = true;
    }
    this.notify();
    try {
      const status = await this.api.submitLabels(this.sessionId, payload);
      this.setStatus(status);
      for (const row of rows) {
        row.state = "acknowledged";
        row.note = null;
      }
    } catch (error) {
      if (error instanceof ConflictError) {
        const offending = new Set(error.ids);
        const retriable: Row[] = [];
        for (const row of rows) {
          if (offending.has(row.message.id)) {
            // we already pushed this row once: the server holding it is success
            row.state = "acknowledged";
            row.note = "already recorded";
          } else {
            row.state = "decided";
            retriable.push(row);
          }
        }
        this.notify();
        // the server rejects a mixed submission atomically; resend the clean rest
        if (retriable.length > 0) {
          await this.submitRows(retriable);
        }
        await this.syncStatus();
      } else {
        for (const row of rows) {
          row.state = "failed";
          row.note = "submit failed, will retry";
        }
        this.banner = "Submission failed. Check the connection and retry.";
        this.notify();
        throw error;
      }
    }
    this.notify();
  }

  private async syncStatus(): Promise<void> {
    const status = await this.guarded(() => this.api.getStatus(this.sessionId));
    this.setStatus(status);
  }

  private async pollUntilAdvanced(versionBefore: number): Promise<void> {
    for (let attempt = 0; attempt < this.pollAttempts; attempt++) {
      const status = await this.guarded(() => this.api.getStatus(this.sessionId));
      this.setStatus(status);
      if (status.complete || status.model_version > versionBefore) return;
      // a single-class label set skips the retrain but still opens a batch
      if (status.pending_count > 0) return;
      await sleep(this.pollIntervalMs);
    }
    throw new Error("server never advanced past the completed batch");
  }

  async exportLabeled(): Promise<string> {
    return this.api.exportLabeled(this.sessionId);
  }

  exportUrl(): string {
    return this.api.exportUrl(this.sessionId);
  }

  private rowById(id: string): Row {
    const row = this.rows.find((r) => r.message.id === id);
    if (!row) throw new Error(`no pending row ${id}`);
    return row;
  }

  private async guarded<T>(call: () => Promise<T>): Promise<T> {
    try {
      const result = await call();
      this.banner = null;
      return result;
    } catch (error) {
      this.banner = "Could not reach the server. Retry when it is back.";
      this.notify();
      throw error;
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
