// UI state and its pure update logic.
//
// The store mirrors the session protocol: the server is authoritative for
// forces and results, while the local needle/plunger cursor is optimistic
// and never waits on a round trip. Depth monotonicity is NOT enforced;
// retraction is a legitimate move.

import type {
  Outcome,
  ServerMessage,
  SessionSummary,
  StrategySummary,
  TrialResult,
  TrialStarted,
} from "./protocol.js";

export type Phase =
  | "disconnected"
  | "idle"
  | "in_session"
  | "trial_active"
  | "post_trial"
  | "session_ended";

export interface GaugeSample {
  tS: number;
  fTouhy: number;
  fLor: number;
}

export interface UiState {
  phase: Phase;
  nTrials: number;
  trialsDone: number;
  trial: TrialStarted | null;
  depthMm: number; // optimistic local needle cursor
  plungerMm: number; // optimistic local plunger cursor
  fTouhy: number; // authoritative rendered forces
  fLor: number;
  history: GaugeSample[]; // trailing force window for the sparkline
  postTrial: TrialResult | null;
  strategies: StrategySummary[]; // one per completed trial, for the report
  summary: SessionSummary | null;
  banner: string | null;
}

export const HISTORY_WINDOW_S = 6;

export function initialState(): UiState {
  return {
    phase: "disconnected",
    nTrials: 0,
    trialsDone: 0,
    trial: null,
    depthMm: 0,
    plungerMm: 0,
    fTouhy: 0,
    fLor: 0,
    history: [],
    postTrial: null,
    strategies: [],
    summary: null,
    banner: null,
  };
}

export function reduce(state: UiState, msg: ServerMessage): UiState {
  switch (msg.type) {
    case "session_started":
      return {
        ...initialState(),
        phase: "in_session",
        nTrials: msg.n_trials,
        banner: null,
      };
    case "trial_started":
      return {
        ...state,
        phase: "trial_active",
        trial: msg,
        depthMm: 0,
        plungerMm: 0,
        fTouhy: 0,
        fLor: 0,
        history: [],
        postTrial: null,
        banner: null,
      };
    case "force_update": {
      const history = state.history.filter((s) => s.tS >= msg.t_s - HISTORY_WINDOW_S);
      history.push({ tS: msg.t_s, fTouhy: msg.f_touhy_n, fLor: msg.f_lor_n });
      return { ...state, fTouhy: msg.f_touhy_n, fLor: msg.f_lor_n, history };
    }
    case "trial_result":
      return {
        ...state,
        phase: "post_trial",
        postTrial: msg,
        strategies: [...state.strategies, msg.strategy_summary],
        trialsDone: state.trialsDone + 1,
      };
    case "session_summary":
      return { ...state, phase: "session_ended", summary: msg, trial: null };
    case "error":
      return { ...state, banner: `${msg.code}: ${msg.message}` };
  }
}

export function onDisconnected(state: UiState): UiState {
  const midTrial = state.phase === "trial_active";
  return {
    ...state,
    phase: "disconnected",
    trial: null,
    banner: midTrial
      ? "connection lost: trial aborted server-side, no record kept - reconnect to continue"
      : "connection lost - reconnect to continue",
  };
}

// --- feedback-visibility rules -------------------------------------------
//
// The trainee must never see needle position relative to the tissue layers
// during a test trial; the layer-annotated plot exists only on
// familiarization feedback screens and in the end-of-session review.

export function layerMapVisible(state: UiState): boolean {
  if (state.phase === "session_ended") {
    return true;
  }
  return (
    state.phase === "post_trial" &&
    state.postTrial !== null &&
    state.postTrial.feedback_allowed &&
    state.postTrial.feedback_plot !== undefined
  );
}

export function outcomeVisible(state: UiState): Outcome | null {
  if (state.phase !== "post_trial" || state.postTrial === null) {
    return null;
  }
  return state.postTrial.feedback_allowed ? state.postTrial.outcome : null;
}

// Per-layer numbers stay hidden until layer context is allowed on screen.
export function perLayerStatsVisible(state: UiState): boolean {
  return layerMapVisible(state);
}

export function moreTrialsRemain(state: UiState): boolean {
  return state.trialsDone < state.nTrials;
}

// --- strategy tips ---------------------------------------------------------
//
// Reference ranges follow the strategies observed in successful expert
// insertions: frequent shallow probing and a slow, steady advance near the
// deep ligaments.

export function strategyTips(summary: StrategySummary): string[] {
  const tips: string[] = [];
  if (summary.probe_count < 10) {
    tips.push(
      "Probe the plunger more often: sparse probing is associated with dural punctures.",
    );
  }
  if (summary.probe_mean_depth_mm !== null && summary.probe_mean_depth_mm > 3.0) {
    tips.push("Keep probing movements shallow (under ~3 mm) to sense resistance without losing precision.");
  }
  if (summary.probe_mean_rate_hz !== null && summary.probe_mean_rate_hz < 1.5) {
    tips.push("Raise your probing rate: experts probe at well over one movement per second.");
  }
  if (tips.length === 0) {
    tips.push("Probing strategy is in the expert range: frequent, shallow, regular.");
  }
  return tips;
}
