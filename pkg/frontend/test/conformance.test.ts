// Scripted-client acceptance against the real session service:
// a full 15-trial session with correct message sequences and
// feedback-visibility rules, plus the drag-to-gauge latency budget.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { WebSocket } from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  encode,
  type ClientMessage,
  type ServerMessage,
  type SessionSummary,
  type TrialResult,
  type TrialStarted,
} from "../src/protocol.js";

const PKG_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");

let server: ChildProcess;
let serverUrl = "";

beforeAll(async () => {
  const recordDir = mkdtempSync(join(tmpdir(), "epidusim-records-"));
  server = spawn(
    "python3",
    ["-m", "epidusim.cli", "serve", "--port", "0", "--record-dir", recordDir],
    { cwd: PKG_ROOT, stdio: ["ignore", "pipe", "inherit"] },
  );
  serverUrl = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server did not start")), 20000);
    let buffer = "";
    server.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/listening on (ws:\/\/[\d.]+:\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
    });
    server.on("exit", (code) => reject(new Error(`server exited early: ${code}`)));
  });
}, 30000);

afterAll(() => {
  server?.kill();
});

class ScriptedClient {
  private socket!: WebSocket;
  private queue: ServerMessage[] = [];
  private waiters: ((msg: ServerMessage) => void)[] = [];

  async connect(url: string): Promise<void> {
    this.socket = new WebSocket(url);
    this.socket.on("message", (data) => {
      const msg = JSON.parse(data.toString()) as ServerMessage;
      const waiter = this.waiters.shift();
      if (waiter) {
        waiter(msg);
      } else {
        this.queue.push(msg);
      }
    });
    await new Promise<void>((resolve, reject) => {
      this.socket.once("open", () => resolve());
      this.socket.once("error", reject);
    });
  }

  send(msg: ClientMessage): void {
    this.socket.send(encode(msg));
  }

  recv(timeoutMs = 10000): Promise<ServerMessage> {
    const queued = this.queue.shift();
    if (queued) {
      return Promise.resolve(queued);
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("timed out waiting for message")), timeoutMs);
      this.waiters.push((msg) => {
        clearTimeout(timer);
        resolve(msg);
      });
    });
  }

  async expect<T extends ServerMessage["type"]>(type: T): Promise<Extract<ServerMessage, { type: T }>> {
    const msg = await this.recv();
    expect(msg.type, JSON.stringify(msg)).toBe(type);
    return msg as Extract<ServerMessage, { type: T }>;
  }

  close(): void {
    this.socket.close();
  }
}

// thickness scaling used to aim each insertion at (or past) the window
function windowFor(massKg: number): [number, number] {
  const ratio = (Math.sqrt((574.94 * (massKg / 71)) / Math.PI) / 13.53) ** 3;
  return [48.38 * ratio, 56.98 * ratio];
}

/** Drive one insertion on a virtual clock and commit at targetDepth. */
async function runTrial(
  client: ScriptedClient,
  targetDepth: number,
  withProbing: boolean,
): Promise<TrialResult> {
  const steps = 120;
  const durationS = 6;
  for (let k = 0; k <= steps; k++) {
    const t = (k / steps) * durationS;
    const depth = (k / steps) * targetDepth;
    // triangular plunger bursts, ~1.5 Hz, 3 mm deep
    const phase = (t * 1.5) % 1;
    const probe = withProbing ? 3.0 * (phase < 0.5 ? phase * 2 : (1 - phase) * 2) : 0;
    client.send({
      v: 1, type: "position_update",
      t_s: t, p_touhy_mm: depth, p_lor_raw_mm: 120 + depth + probe,
    });
    const force = await client.expect("force_update");
    expect(force.t_s).toBeCloseTo(t, 9);
    expect(force.f_lor_n).toBeCloseTo(2 * force.f_touhy_n, 9);
  }
  client.send({ v: 1, type: "commit" });
  return client.expect("trial_result");
}

describe("protocol conformance (scripted 15-trial session)", () => {
  it(
    "runs the full default session with correct sequences and visibility",
    { timeout: 120000 },
    async () => {
      const client = new ScriptedClient();
      await client.connect(serverUrl);
      client.send({
        v: 1, type: "start_session", participant: "scripted",
        config: { rng_seed: 123 },
      });
      const started = await client.expect("session_started");
      expect(started.n_trials).toBe(15);

      const trials: TrialStarted[] = [];
      const expectedOutcomes: string[] = [];
      for (let i = 0; i < 15; i++) {
        client.send({ v: 1, type: "start_trial" });
        const ts = await client.expect("trial_started");
        trials.push(ts);
        expect(ts.trial_index).toBe(i);

        const [lo, hi] = windowFor(ts.body_mass_kg);
        // overshoot the 8th trial on purpose; aim mid-window otherwise
        const overshoot = i === 7;
        const target = overshoot ? hi + 3 : (lo + hi) / 2;
        expectedOutcomes.push(overshoot ? "dural_puncture" : "success");

        const result = await runTrial(client, target, i % 2 === 0);
        expect(result.trial_index).toBe(i);
        expect(result.kind).toBe(ts.kind);
        if (ts.kind === "familiarization") {
          expect(result.feedback_allowed).toBe(true);
          expect(result.outcome).not.toBeNull();
          expect(result.outcome!.kind).toBe("success");
          expect(result.feedback_plot).toBeDefined();
          expect(result.feedback_plot!.layers.length).toBeGreaterThan(0);
        } else {
          expect(result.feedback_allowed).toBe(false);
          expect(result.outcome).toBeNull();
          expect(result.feedback_plot).toBeUndefined();
        }
        expect(result.strategy_summary.probe_count).toBeGreaterThanOrEqual(0);
        if (i % 2 === 0) {
          expect(result.strategy_summary.probe_count).toBeGreaterThan(3);
        }
      }

      // schedule shape: 3 familiarization at 71 kg, then 4 blocks of the 3 masses
      for (let i = 0; i < 3; i++) {
        expect(trials[i].kind).toBe("familiarization");
        expect(trials[i].body_mass_kg).toBe(71);
      }
      for (let b = 0; b < 4; b++) {
        const block = trials.slice(3 + 3 * b, 6 + 3 * b);
        expect(block.every((t) => t.kind === "test")).toBe(true);
        expect(block.map((t) => t.body_mass_kg).sort((x, y) => x - y)).toEqual([55, 85, 115]);
      }

      client.send({ v: 1, type: "end_session" });
      const summary: SessionSummary = await client.expect("session_summary");
      expect(summary.trials.length).toBe(15);
      summary.trials.forEach((t, i) => {
        expect(t.outcome).toBe(expectedOutcomes[i]);
      });
      client.close();
    },
  );

  it("rejects bad frames without dropping the connection", async () => {
    const client = new ScriptedClient();
    await client.connect(serverUrl);
    client.send({ v: 1, type: "commit" });
    const err1 = await client.expect("error");
    expect(err1.code).toBe("bad_state");
    client.send({ v: 1, type: "start_session", config: { rng_seed: 1 } });
    await client.expect("session_started");
    client.close();
  });
});

describe("latency budget", () => {
  it("drag-to-gauge round trip stays under 50 ms", { timeout: 60000 }, async () => {
    const client = new ScriptedClient();
    await client.connect(serverUrl);
    client.send({ v: 1, type: "start_session", config: { rng_seed: 7 } });
    await client.expect("session_started");
    client.send({ v: 1, type: "start_trial" });
    await client.expect("trial_started");

    const rtts: number[] = [];
    for (let k = 0; k < 200; k++) {
      const depth = k * 0.05;
      const sentAt = performance.now();
      client.send({
        v: 1, type: "position_update",
        t_s: k / 100, p_touhy_mm: depth, p_lor_raw_mm: 120 + depth,
      });
      await client.expect("force_update");
      rtts.push(performance.now() - sentAt);
    }
    rtts.sort((a, b) => a - b);
    const mean = rtts.reduce((a, b) => a + b, 0) / rtts.length;
    const p95 = rtts[Math.floor(rtts.length * 0.95)];
    // eslint-disable-next-line no-console
    console.log(`latency mean=${mean.toFixed(2)} ms p95=${p95.toFixed(2)} ms`);
    expect(mean).toBeLessThan(50);
    expect(p95).toBeLessThan(50);
    client.close();
  });
});
