// Wire protocol v1 for the session service (see ../PROTOCOL.md).
// JSON text frames; every message carries `v` and a `type` tag.

export const PROTOCOL_VERSION = 1;

export type TrialKindName = "familiarization" | "test";
export type OutcomeKindName = "failed_epidural" | "success" | "dural_puncture";

export interface SessionConfig {
  n_familiarization?: number;
  familiarization_mass?: number;
  test_masses?: number[];
  blocks?: number;
  rng_seed?: number;
  feedback_in_familiarization?: boolean;
}

export interface StartSession {
  v: 1;
  type: "start_session";
  config?: SessionConfig;
  participant?: string;
}
export interface StartTrial {
  v: 1;
  type: "start_trial";
}
export interface PositionUpdate {
  v: 1;
  type: "position_update";
  t_s: number;
  p_touhy_mm: number;
  p_lor_raw_mm: number;
}
export interface Commit {
  v: 1;
  type: "commit";
}
export interface EndSession {
  v: 1;
  type: "end_session";
}
export type ClientMessage = StartSession | StartTrial | PositionUpdate | Commit | EndSession;

export interface SessionStarted {
  v: 1;
  type: "session_started";
  n_trials: number;
}
export interface TrialStarted {
  v: 1;
  type: "trial_started";
  trial_index: number;
  kind: TrialKindName;
  body_mass_kg: number;
}
export interface ForceUpdate {
  v: 1;
  type: "force_update";
  t_s: number;
  f_touhy_n: number;
  f_lor_n: number;
  depth_mm: number;
}
export interface Outcome {
  kind: OutcomeKindName;
  signed_error_mm: number;
}
export interface StrategySummary {
  probe_count: number;
  probe_mean_depth_mm: number | null;
  probe_mean_rate_hz: number | null;
  layer_mean_speed_mm_s: Record<string, number>;
}
export interface LayerBand {
  tissue: string;
  stage: string;
  start_mm: number;
  end_mm: number;
}
export interface FeedbackPlot {
  trace: { t_s: number[]; depth_mm: number[] };
  layers: LayerBand[];
  epidural_window_mm: [number, number];
}
export interface TrialResult {
  v: 1;
  type: "trial_result";
  trial_index: number;
  kind: TrialKindName;
  feedback_allowed: boolean;
  outcome: Outcome | null;
  strategy_summary: StrategySummary;
  feedback_plot?: FeedbackPlot;
}
export interface SummaryTrial {
  trial_index: number;
  kind: TrialKindName;
  body_mass_kg: number;
  outcome: OutcomeKindName;
  signed_error_mm: number;
  final_depth_mm: number;
}
export interface SessionSummary {
  v: 1;
  type: "session_summary";
  trials: SummaryTrial[];
}
export interface ErrorMessage {
  v: 1;
  type: "error";
  code: "invalid_message" | "bad_state" | "validation" | "internal";
  message: string;
}
export type ServerMessage =
  | SessionStarted
  | TrialStarted
  | ForceUpdate
  | TrialResult
  | SessionSummary
  | ErrorMessage;

const SERVER_TYPES = new Set([
  "session_started",
  "trial_started",
  "force_update",
  "trial_result",
  "session_summary",
  "error",
]);

export function encode(message: ClientMessage): string {
  return JSON.stringify(message);
}

export function decodeServer(data: string): ServerMessage {
  const raw = JSON.parse(data) as { v?: number; type?: string };
  if (raw.v !== PROTOCOL_VERSION) {
    throw new Error(`unsupported protocol version ${raw.v}`);
  }
  if (!raw.type || !SERVER_TYPES.has(raw.type)) {
    throw new Error(`unknown server message type ${raw.type}`);
  }
  return raw as ServerMessage;
}

export function positionUpdate(tS: number, touhyMm: number, lorRawMm: number): PositionUpdate {
  return { v: 1, type: "position_update", t_s: tS, p_touhy_mm: touhyMm, p_lor_raw_mm: lorRawMm };
}
