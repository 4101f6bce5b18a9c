// Trainer console: screens, rendering, and control wiring.
//
// Live trials show force gauges only. The layer-annotated depth plot is
// rendered exclusively on familiarization feedback screens and in the
// end-of-session review; every layer-context element carries a
// `data-layer-map` attribute so the blindness invariant is testable.

import { SessionClient, type SocketFactory } from "./client.js";
import { DEFAULT_CONTROLS, InsertionControls, type ControlConfig } from "./controls.js";
import { drawDial, drawSparkline } from "./gauges.js";
import {
  positionUpdate,
  type FeedbackPlot,
  type ServerMessage,
  type SessionConfig,
  type StrategySummary,
  type SummaryTrial,
} from "./protocol.js";
import {
  initialState,
  layerMapVisible,
  moreTrialsRemain,
  onDisconnected,
  outcomeVisible,
  perLayerStatsVisible,
  strategyTips,
  type UiState,
} from "./state.js";

// rest distance between the two device origins; the engine calibrates it away
const LOR_REST_OFFSET_MM = 120;

const OUTCOME_LABELS: Record<string, string> = {
  success: "Success - the needle stopped inside the epidural space",
  failed_epidural: "Failed epidural - the needle stopped short of the space",
  dural_puncture: "Dural puncture - the needle overshot through the dura",
};

export interface AppOptions {
  url: string;
  socketFactory: SocketFactory;
  participant?: string;
  config?: SessionConfig;
  controls?: ControlConfig;
  now?: () => number;
}

export class TrainerApp {
  state: UiState = initialState();
  readonly client: SessionClient;
  private readonly now: () => number;
  private trialStartMs = 0;
  private controls: InsertionControls | null = null;
  private readonly el: Record<string, HTMLElement> = {};

  constructor(
    private readonly root: HTMLElement,
    private readonly options: AppOptions,
  ) {
    this.now = options.now ?? (() => performance.now());
    this.buildDom();
    this.client = new SessionClient(
      options.url,
      {
        onOpen: () => {
          this.state = { ...this.state, phase: "idle", banner: null };
          this.render();
        },
        onMessage: (msg) => this.handleServer(msg),
        onClose: () => {
          this.state = onDisconnected(this.state);
          this.render();
        },
      },
      options.socketFactory,
    );
    this.render();
  }

  connect(): void {
    this.client.connect();
  }

  handleServer(msg: ServerMessage): void {
    if (msg.type === "trial_started") {
      this.trialStartMs = this.now();
    }
    this.state = reduceInto(this.state, msg);
    if (msg.type === "trial_started") {
      // first sample anchors the trial clock and the zero-point calibration
      this.sendPositions();
    }
    if (msg.type === "trial_result" || msg.type === "session_summary") {
      this.controls?.detach();
    }
    this.render();
  }

  trialTimeS(): number {
    return (this.now() - this.trialStartMs) / 1000;
  }

  sendPositions(): void {
    if (this.state.phase !== "trial_active" || !this.client.connected) {
      return;
    }
    const depth = this.state.depthMm;
    const raw = LOR_REST_OFFSET_MM + depth + this.state.plungerMm;
    this.client.send(positionUpdate(this.trialTimeS(), depth, raw));
  }

  // ------------------------------------------------------------------ DOM

  private buildDom(): void {
    this.root.innerHTML = `
      <header>
        <h1>Epidural insertion trainer</h1>
        <div id="banner" hidden></div>
      </header>
      <section id="screen-connect">
        <p>Bimanual insertion console: your left hand is the needle (drag the pad),
           your right thumb is the syringe plunger (hold Shift while dragging, or use
           the slider). Commit when you believe the needle tip sits in the epidural
           space.</p>
        <button id="btn-connect">Connect</button>
        <button id="btn-start-session" hidden>Start session</button>
      </section>
      <section id="screen-trial" hidden>
        <div id="trial-head"></div>
        <div class="trial-grid">
          <div id="drag-pad" title="drag: needle, shift-drag: plunger">
            <span id="pad-hint">drag to advance / retract</span>
          </div>
          <div class="gauges">
            <canvas id="dial-touhy" width="190" height="132"></canvas>
            <canvas id="dial-lor" width="190" height="132"></canvas>
            <canvas id="sparkline" width="396" height="72"></canvas>
            <label class="plunger">plunger
              <input id="plunger-slider" type="range" min="0" max="12" step="0.1" value="0">
            </label>
            <button id="btn-commit">Commit injection site</button>
          </div>
        </div>
      </section>
      <section id="screen-result" hidden>
        <div id="result-body"></div>
        <button id="btn-next-trial" hidden>Next trial</button>
        <button id="btn-end-session" hidden>End session</button>
      </section>
      <section id="screen-summary" hidden>
        <div id="summary-body"></div>
      </section>
    `;
    for (const id of [
      "banner", "screen-connect", "screen-trial", "screen-result", "screen-summary",
      "btn-connect", "btn-start-session", "trial-head", "drag-pad", "plunger-slider",
      "btn-commit", "result-body", "btn-next-trial", "btn-end-session", "summary-body",
      "dial-touhy", "dial-lor", "sparkline",
    ]) {
      const node = this.root.querySelector<HTMLElement>(`#${id}`);
      if (!node) {
        throw new Error(`missing element #${id}`);
      }
      this.el[id] = node;
    }

    this.el["btn-connect"].addEventListener("click", () => this.connect());
    this.el["btn-start-session"].addEventListener("click", () =>
      this.client.startSession(this.options.participant, this.options.config),
    );
    this.el["btn-commit"].addEventListener("click", () => {
      this.sendPositions();
      this.client.commit();
    });
    this.el["btn-next-trial"].addEventListener("click", () => this.client.startTrial());
    this.el["btn-end-session"].addEventListener("click", () => this.client.endSession());
    (this.el["plunger-slider"] as HTMLInputElement).addEventListener("input", (ev) => {
      this.state = { ...this.state, plungerMm: Number((ev.target as HTMLInputElement).value) };
      this.sendPositions();
    });

    this.controls = new InsertionControls(
      this.el["drag-pad"],
      this.options.controls ?? DEFAULT_CONTROLS,
      {
        getDepth: () => this.state.depthMm,
        setDepth: (mm) => {
          this.state = { ...this.state, depthMm: mm };
        },
        getPlunger: () => this.state.plungerMm,
        setPlunger: (mm) => {
          this.state = { ...this.state, plungerMm: mm };
          (this.el["plunger-slider"] as HTMLInputElement).value = mm.toFixed(1);
        },
        sendPositions: () => this.sendPositions(),
      },
    );
  }

  render(): void {
    const s = this.state;
    this.el["banner"].hidden = s.banner === null;
    this.el["banner"].textContent = s.banner ?? "";

    this.el["screen-connect"].hidden = !(s.phase === "disconnected" || s.phase === "idle");
    this.el["btn-connect"].hidden = s.phase !== "disconnected";
    this.el["btn-start-session"].hidden = s.phase !== "idle";

    this.el["screen-trial"].hidden = s.phase !== "trial_active";
    if (s.phase === "trial_active" && s.trial) {
      this.el["trial-head"].textContent =
        `Trial ${s.trial.trial_index + 1} of ${s.nTrials} - ` +
        `${s.trial.kind === "familiarization" ? "familiarization" : "test"} - ` +
        `patient body mass ${s.trial.body_mass_kg.toFixed(0)} kg`;
      drawDial(this.el["dial-touhy"] as HTMLCanvasElement, s.fTouhy, "Touhy needle", "#e0a23f");
      drawDial(this.el["dial-lor"] as HTMLCanvasElement, s.fLor, "LOR syringe", "#4fa3e0");
      drawSparkline(this.el["sparkline"] as HTMLCanvasElement, s.history);
    }

    this.el["screen-result"].hidden = s.phase !== "post_trial";
    if (s.phase === "post_trial" && s.postTrial) {
      this.renderResult();
      const remain = moreTrialsRemain(s);
      this.el["btn-next-trial"].hidden = !remain;
      this.el["btn-end-session"].hidden = remain;
    }

    this.el["screen-summary"].hidden = s.phase !== "session_ended";
    if (s.phase === "session_ended" && s.summary) {
      this.renderSummary();
    }
  }

  private renderResult(): void {
    const s = this.state;
    const result = s.postTrial!;
    const body = this.el["result-body"];
    body.innerHTML = "";

    const heading = document.createElement("h2");
    const outcome = outcomeVisible(s);
    if (outcome) {
      heading.textContent = OUTCOME_LABELS[outcome.kind] ?? outcome.kind;
      heading.dataset.outcome = outcome.kind;
      const err = document.createElement("p");
      err.textContent =
        outcome.signed_error_mm === 0
          ? "Error: 0 mm"
          : `Error: ${outcome.signed_error_mm.toFixed(1)} mm ` +
            `(${outcome.signed_error_mm < 0 ? "short of" : "past"} the epidural space)`;
      body.append(heading, err);
    } else {
      heading.textContent = `Trial ${result.trial_index + 1} recorded`;
      const note = document.createElement("p");
      note.textContent = "Result withheld during test trials; see the end-of-session report.";
      body.append(heading, note);
    }

    body.append(this.strategyBlock(result.strategy_summary, perLayerStatsVisible(s)));

    if (layerMapVisible(s) && result.feedback_plot) {
      body.append(this.feedbackPlotBlock(result.feedback_plot));
    }
  }

  private strategyBlock(summary: StrategySummary, withLayers: boolean): HTMLElement {
    const div = document.createElement("div");
    div.className = "strategy";
    const fmt = (x: number | null, unit: string) => (x === null ? "-" : `${x.toFixed(2)} ${unit}`);
    div.innerHTML = `
      <h3>Probing strategy</h3>
      <ul>
        <li>probing movements: ${summary.probe_count}</li>
        <li>mean probe depth: ${fmt(summary.probe_mean_depth_mm, "mm")}</li>
        <li>mean probe rate: ${fmt(summary.probe_mean_rate_hz, "Hz")}</li>
      </ul>
    `;
    if (withLayers && Object.keys(summary.layer_mean_speed_mm_s).length > 0) {
      const table = document.createElement("table");
      table.dataset.layerMap = "speeds";
      table.innerHTML =
        "<tr><th>layer</th><th>mean needle speed</th></tr>" +
        Object.entries(summary.layer_mean_speed_mm_s)
          .map(([layer, v]) => `<tr><td>${layer}</td><td>${v.toFixed(2)} mm/s</td></tr>`)
          .join("");
      div.append(table);
    }
    return div;
  }

  private feedbackPlotBlock(plot: FeedbackPlot): HTMLElement {
    const wrap = document.createElement("div");
    wrap.dataset.layerMap = "depth-plot";
    const title = document.createElement("h3");
    title.textContent = "Insertion depth through the tissue layers";
    const canvas = document.createElement("canvas");
    canvas.width = 640;
    canvas.height = 320;
    wrap.append(title, canvas);
    drawFeedbackPlot(canvas, plot);
    return wrap;
  }

  private renderSummary(): void {
    const s = this.state;
    const body = this.el["summary-body"];
    const trials = s.summary!.trials;
    const tests = trials.filter((t) => t.kind === "test");
    const rate = (kind: string, set: SummaryTrial[]) =>
      set.length === 0 ? 0 : set.filter((t) => t.outcome === kind).length / set.length;

    body.innerHTML = "<h2>Session report</h2>";
    const stats = document.createElement("p");
    stats.textContent =
      `Test trials: ${tests.length} - success ${(100 * rate("success", tests)).toFixed(0)}%, ` +
      `failed epidurals ${(100 * rate("failed_epidural", tests)).toFixed(0)}%, ` +
      `dural punctures ${(100 * rate("dural_puncture", tests)).toFixed(0)}%`;
    body.append(stats);

    const table = document.createElement("table");
    table.id = "summary-table";
    table.innerHTML =
      "<tr><th>#</th><th>kind</th><th>mass</th><th>outcome</th><th>error</th></tr>" +
      trials
        .map(
          (t) =>
            `<tr><td>${t.trial_index + 1}</td><td>${t.kind}</td>` +
            `<td>${t.body_mass_kg.toFixed(0)} kg</td><td>${t.outcome}</td>` +
            `<td>${t.signed_error_mm.toFixed(1)} mm</td></tr>`,
        )
        .join("");
    body.append(table);

    if (s.strategies.length > 0) {
      const mean = (pick: (x: StrategySummary) => number | null) => {
        const xs = s.strategies.map(pick).filter((v): v is number => v !== null);
        return xs.length ? xs.reduce((a, b) => a + b, 0) / xs.length : null;
      };
      const aggregate: StrategySummary = {
        probe_count: Math.round((mean((x) => x.probe_count) ?? 0) * 10) / 10,
        probe_mean_depth_mm: mean((x) => x.probe_mean_depth_mm),
        probe_mean_rate_hz: mean((x) => x.probe_mean_rate_hz),
        layer_mean_speed_mm_s: {},
      };
      body.append(this.strategyBlock(aggregate, false));
      const tips = document.createElement("div");
      tips.id = "strategy-tips";
      tips.innerHTML =
        "<h3>Coaching tips</h3><ul>" +
        strategyTips(aggregate).map((t) => `<li>${t}</li>`).join("") +
        "</ul>";
      body.append(tips);
    }
  }
}

// kept out of the class so state transitions stay importable by tests
import { reduce } from "./state.js";
function reduceInto(state: UiState, msg: ServerMessage): UiState {
  return reduce(state, msg);
}

export function drawFeedbackPlot(canvas: HTMLCanvasElement, plot: FeedbackPlot): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const w = canvas.width;
  const h = canvas.height;
  const t = plot.trace.t_s;
  const depth = plot.trace.depth_mm;
  const tMax = Math.max(t[t.length - 1] ?? 1, 1e-6);
  const deepest = Math.max(...plot.layers.map((l) => l.end_mm), ...depth) * 1.05;
  const y = (mm: number) => (mm / deepest) * (h - 20) + 10;
  const x = (ts: number) => (ts / tMax) * (w - 60) + 50;

  ctx.clearRect(0, 0, w, h);
  const palette = ["#f4d58d", "#e8a87c", "#c38d9e", "#85cdca", "#41b3a3", "#b8d8d8"];
  plot.layers.forEach((layer, i) => {
    ctx.fillStyle = palette[i % palette.length] + "55";
    ctx.fillRect(50, y(layer.start_mm), w - 60, y(layer.end_mm) - y(layer.start_mm));
  });
  const [winLo, winHi] = plot.epidural_window_mm;
  ctx.strokeStyle = "#3fae5a";
  ctx.setLineDash([5, 4]);
  for (const mm of [winLo, winHi]) {
    ctx.beginPath();
    ctx.moveTo(50, y(mm));
    ctx.lineTo(w - 10, y(mm));
    ctx.stroke();
  }
  ctx.setLineDash([]);
  ctx.strokeStyle = "#1d2733";
  ctx.lineWidth = 2;
  ctx.beginPath();
  depth.forEach((mm, i) => {
    if (i === 0) {
      ctx.moveTo(x(t[i]), y(mm));
    } else {
      ctx.lineTo(x(t[i]), y(mm));
    }
  });
  ctx.stroke();
  ctx.fillStyle = "#5a6672";
  ctx.font = "11px system-ui, sans-serif";
  const seen = new Set<string>();
  plot.layers.forEach((layer) => {
    if (!seen.has(layer.tissue)) {
      seen.add(layer.tissue);
      ctx.fillText(layer.tissue.replace(/_/g, " "), 4, y(layer.start_mm) + 10);
    }
  });
}
