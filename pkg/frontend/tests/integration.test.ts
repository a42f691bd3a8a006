// Live round-trip against the real engine: simulated amplifier + gateway
// as separate processes, the console's client/store/actions driving the
// whole workflow over WebSocket exactly as the panels do.

import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { GatewayClient } from "../src/client.js";
import { Actions } from "../src/panels.js";
import { SessionState, ValidationReportPayload } from "../src/protocol.js";
import { AppStore, reportView } from "../src/store.js";
import { RenderLoop } from "../src/renderloop.js";
import { TraceBuffer, outlierChannels } from "../src/traces.js";
import { drawTraces, Ctx2D } from "../src/render.js";

const base = 21000 + (process.pid % 800) * 10;
const DEV_PORT = base;
const CTL_PORT = base + 1;
const GW_PORT = base + 2;

let simdev: ChildProcess;
let gateway: ChildProcess;

function spawnPy(args: string[]): ChildProcess {
  const p = spawn("python3", args, { stdio: ["ignore", "pipe", "pipe"] });
  p.stderr?.on("data", () => {});
  p.stdout?.on("data", () => {});
  return p;
}

async function waitHealthy(url: string, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const r = await fetch(url);
      if (r.ok) return;
    } catch {
      /* not up yet */
    }
    await sleep(150);
  }
  throw new Error(`service at ${url} never became healthy`);
}

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

interface Harness {
  client: GatewayClient;
  store: AppStore;
  actions: Actions;
  lastState: () => SessionState | null;
  reports: ValidationReportPayload[];
  traces: TraceBuffer;
  waitPhase: (phase: string, timeoutMs?: number) => Promise<void>;
  close: () => void;
}

function connectConsole(): Promise<Harness> {
  const store = new AppStore();
  const client = new GatewayClient(
    `ws://127.0.0.1:${GW_PORT}/ws`,
    (url) => new WebSocket(url) as never,
  );
  const actions = new Actions(client, store);
  const traces = new TraceBuffer(5.0);
  const reports: ValidationReportPayload[] = [];
  let state: SessionState | null = null;
  client.on("state", (s) => {
    state = s;
    store.applyState(s);
  });
  client.on("plot", (p) => traces.pushChunks(p.chunks, p.dropped));
  client.on("validation_report", (r) => {
    reports.push(r);
    store.applyReport(r);
  });
  const waitPhase = async (phase: string, timeoutMs = 120000) => {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
      if (state?.phase === phase) return;
      await sleep(25);
    }
    throw new Error(`phase ${phase} not reached (at ${state?.phase})`);
  };
  return new Promise((resolve, reject) => {
    client.on("open", () => {
      store.setConnected(true);
      resolve({
        client, store, actions, reports, traces, waitPhase,
        lastState: () => state,
        close: () => client.close(),
      });
    });
    client.connect();
    setTimeout(() => reject(new Error("gateway websocket never opened")), 20000);
  });
}

beforeAll(async () => {
  simdev = spawnPy([
    "-m", "myodecode.simdev",
    "--port", String(DEV_PORT),
    "--control-port", String(CTL_PORT),
    "--no-realtime",
    "--noisy-channels", "1,17",
  ]);
  gateway = spawnPy([
    "-m", "myodecode.gateway.cli", "serve",
    "--bind", `127.0.0.1:${GW_PORT}`,
    "--sim-control", `127.0.0.1:${CTL_PORT}`,
  ]);
  await waitHealthy(`http://127.0.0.1:${GW_PORT}/health`);
}, 60000);

afterAll(() => {
  gateway?.kill("SIGKILL");
  simdev?.kill("SIGKILL");
});

describe("console round-trip against a live engine", () => {
  it("connect, record two movements, train, validate via the workflow surface",
     async () => {
    const ui = await connectConsole();
    try {
      expect(ui.store.gating().connect).toBe(true);
      expect(await ui.actions.connectDevice("127.0.0.1", DEV_PORT)).toBe(true);
      await ui.waitPhase("monitoring");
      expect(ui.store.gating().record).toBe(true);
      expect(ui.store.gating().train).toBe(false);

      for (const movement of ["thumb", "index"]) {
        expect(await ui.actions.startRecording(movement, 8.0)).toBe(true);
        await ui.waitPhase("monitoring");
      }
      expect(ui.lastState()?.segments).toEqual(["thumb", "index"]);
      expect(ui.store.gating().train).toBe(true);

      expect(await ui.actions.train(80)).toBe(true);
      await ui.waitPhase("idle");
      expect(ui.lastState()?.model_ready).toBe(true);

      expect(await ui.actions.startValidation(["thumb", "index"], 2, 15.0))
        .toBe(true);
      await ui.waitPhase("idle");
      expect(ui.reports).toHaveLength(1);

      // the view model must carry the engine's JSON byte-for-byte in values
      const engineReport = (await (
        await fetch(`http://127.0.0.1:${GW_PORT}/report`)
      ).json()) as ValidationReportPayload;
      const view = reportView(ui.reports[0]);
      expect(view.rows.map((r) => r.movement))
        .toEqual(engineReport.per_movement.map((m) => m.movement));
      engineReport.per_movement.forEach((m, i) => {
        expect(view.rows[i].naive).toBe(m.naive_accuracy);
        expect(view.rows[i].conformal).toBe(m.conformal_accuracy);
        expect(view.rows[i].n).toBe(m.n_predictions);
      });
      expect(view.naiveMean).toBe(engineReport.naive_mean);
      expect(view.naiveStd).toBe(engineReport.naive_std);
      expect(view.conformalMean).toBe(engineReport.conformal_mean);
      expect(view.conformalStd).toBe(engineReport.conformal_std);

      // decoding sanity: the synthetic session should be very separable
      expect(view.naiveMean).toBeGreaterThan(0.9);
    } finally {
      ui.close();
    }
  }, 180000);

  it("live traces: 32 channels flowing, renderable at >= 20 fps", async () => {
    const ui = await connectConsole();
    try {
      // device already connected from the previous test; just collect
      await sleep(2000);
      expect(ui.traces.length).toBeGreaterThan(100);
      const amps = ui.traces.amplitudes();
      expect(amps).toHaveLength(32);
      expect(amps.every((a) => a > 0)).toBe(true);

      const ctx = new (class implements Ctx2D {
        fillStyle: any = ""; strokeStyle: any = ""; lineWidth = 1; font = "";
        clearRect(): void {} fillRect(): void {} beginPath(): void {}
        moveTo(): void {} lineTo(): void {} arc(): void {}
        stroke(): void {} fill(): void {} fillText(): void {}
      })();
      const loop = new RenderLoop(
        () => drawTraces(ctx, ui.traces, 800, 640,
                         new Set(outlierChannels(ui.traces))),
        (cb) => setTimeout(cb, 0),
      );
      loop.start();
      await sleep(1100);
      loop.stop();
      expect(loop.fps()).toBeGreaterThanOrEqual(20);
    } finally {
      ui.close();
    }
  }, 60000);

  it("no-contact channels 1 and 17 stand out beyond 5x the median trace",
     async () => {
    const ui = await connectConsole();
    try {
      await sleep(2500);
      const flagged = outlierChannels(ui.traces, 5.0);
      expect(flagged).toContain(1);
      expect(flagged).toContain(17);
      expect(flagged).toHaveLength(2);
    } finally {
      ui.close();
    }
  }, 60000);
});
