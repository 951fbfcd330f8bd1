// Pure view-model construction and key bindings, kept DOM-free so the
// queue logic is unit-testable.

import { SessionClient, Row } from "./session.js";

export interface RowView {
  id: string;
  text: string;
  /** ambiguity column: only shown once a model exists (round >= 1) */
  score: number | null;
  decision: 0 | 1 | null;
  state: Row["state"];
  note: string | null;
  cursor: boolean;
}

export interface RenderModel {
  phase: string;
  rows: RowView[];
  labeledCount: number;
  targetTotal: number;
  progressFraction: number;
  round: number;
  modelVersion: number;
  banner: string | null;
  exportUrl: string | null;
  canSubmit: boolean;
}

export function buildRenderModel(client: SessionClient, cursorIndex: number): RenderModel {
  const status = client.status;
  if (!status) {
    return {
      phase: "idle",
      rows: [],
      labeledCount: 0,
      targetTotal: 0,
      progressFraction: 0,
      round: 0,
      modelVersion: 0,
      banner: client.banner,
      exportUrl: null,
      canSubmit: false,
    };
  }
  const showScores = status.round >= 1;
  const rows = client.rows.map((row, i) => ({
    id: row.message.id,
    text: row.message.text,
    score: showScores ? row.message.score : null,
    decision: row.decision,
    state: row.state,
    note: row.note,
    cursor: i === cursorIndex,
  }));
  return {
    phase: client.phase,
    rows,
    labeledCount: status.labeled_count,
    targetTotal: status.target_total,
    progressFraction:
      status.target_total > 0 ? status.labeled_count / status.target_total : 0,
    round: status.round,
    modelVersion: client.modelVersion,
    banner: client.banner,
    exportUrl: status.complete ? client.exportUrl() : null,
    canSubmit: client.decidedRows().length > 0,
  };
}

export type KeyAction =
  | "urgent"
  | "non_urgent"
  | "undo"
  | "submit"
  | "next"
  | "prev"
  | null;

/** One key, one action: u/n decide, z undoes, enter submits, j/k move. */
export function keyAction(key: string): KeyAction {
  switch (key.toLowerCase()) {
    case "u":
      return "urgent";
    case "n":
      return "non_urgent";
    case "z":
      return "undo";
    case "enter":
    case "s":
      return "submit";
    case "j":
    case "arrowdown":
      return "next";
    case "k":
    case "arrowup":
      return "prev";
    default:
      return null;
  }
}
