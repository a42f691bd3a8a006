// DOM bootstrap: wires the gateway client, the store, and the canvases.

import { GatewayClient } from "./client.js";
import { Easing, Freshness, handGlyph } from "./hands.js";
import { Actions } from "./panels.js";
import { PredictionPayload } from "./protocol.js";
import { drawCursor, drawHand, drawTraces } from "./render.js";
import { RenderLoop } from "./renderloop.js";
import { AppStore, PanelId, formatAccuracy, reportView } from "./store.js";
import { TraceBuffer, outlierChannels } from "./traces.js";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function gatewayUrl(): string {
  const q = new URLSearchParams(location.search).get("gateway");
  const host = q ?? location.host;
  return `ws://${host}/ws`;
}

const store = new AppStore();
const client = new GatewayClient(gatewayUrl(), (url) => new WebSocket(url));
const actions = new Actions(client, store);
const traces = new TraceBuffer(5.0);
const guideEase = new Easing(0.05);
const predEase = new Easing(0.15);
const guideFresh = new Freshness();
const predFresh = new Freshness();
let lastPrediction: PredictionPayload | null = null;

client.on("state", (s) => store.applyState(s));
client.on("validation_report", (r) => store.applyReport(r));
client.on("plot", (p) => traces.pushChunks(p.chunks, p.dropped));
client.on("prediction", (p) => {
  lastPrediction = p;
  predFresh.touch(performance.now());
  guideFresh.touch(performance.now());
});
client.on("open", () => {
  store.setConnected(true);
  store.setBanner(null);
  void actions.refreshCatalog();
});
client.on("close", () => store.setConnected(false));
client.on("reconnecting", (attempt, delay) =>
  store.setBanner(`gateway connection lost; retry ${attempt} in ${delay} ms`),
);

// -- panels -----------------------------------------------------------

const PANELS: PanelId[] = ["input", "output", "workflow"];

function showPanel(panel: PanelId): void {
  store.setPanel(panel);
}

function renderPanels(): void {
  for (const p of PANELS) {
    $(`panel-${p}`).classList.toggle("hidden", store.activePanel !== p);
    $(`tab-${p}`).classList.toggle("active", store.activePanel === p);
  }
}

function renderStatus(): void {
  const s = store.state;
  $("phase").textContent = s.phase + (s.movement ? `: ${s.movement}` : "");
  const remaining = s.t_remaining_s;
  $("phase-detail").textContent =
    s.phase === "recording" && remaining !== null
      ? `${remaining.toFixed(1)} s left`
      : s.phase === "validating" && s.rep !== null
        ? `rep ${s.rep}`
        : "";
  $("banner").textContent = store.banner ?? s.error ?? "";
  $("banner").classList.toggle("hidden", !(store.banner ?? s.error));
  $("gateway-dot").classList.toggle("up", store.connected);
  $("device-dot").classList.toggle("up", s.device_connected);
  $("segments").textContent = s.segments.join(", ") || "none";

  const g = store.gating();
  ($("btn-connect") as HTMLButtonElement).disabled = !g.connect;
  ($("btn-disconnect") as HTMLButtonElement).disabled = !g.disconnect;
  ($("btn-record") as HTMLButtonElement).disabled = !g.record;
  ($("btn-stop") as HTMLButtonElement).disabled = !g.stop;
  ($("btn-train") as HTMLButtonElement).disabled = !g.train;
  ($("btn-validate") as HTMLButtonElement).disabled = !g.validate;
  ($("sel-remap-from") as HTMLSelectElement).disabled = !g.remap;
  ($("sel-remap-to") as HTMLSelectElement).disabled = !g.remap;
}

function renderCatalog(): void {
  const ids = store.catalog.map((m) => m.id);
  for (const selId of ["sel-movement", "sel-remap-from", "sel-remap-to"]) {
    const sel = $(selId) as HTMLSelectElement;
    const current = sel.value;
    sel.innerHTML = "";
    for (const id of ids) {
      if (selId === "sel-movement" && id === "rest") continue;
      const opt = document.createElement("option");
      opt.value = id;
      const info = store.catalog.find((m) => m.id === id);
      opt.textContent = info?.display_id ? `${id} (shown as ${info.display_id})` : id;
      sel.appendChild(opt);
    }
    if (ids.includes(current)) sel.value = current;
  }
}

function renderReport(): void {
  const target = $("report");
  if (!store.report) {
    target.innerHTML = "<em>no validation yet</em>";
    return;
  }
  const v = reportView(store.report);
  const rows = v.rows
    .map(
      (r) => `<tr><td>${r.movement}</td>` +
        `<td title="${r.naive}">${formatAccuracy(r.naive)}</td>` +
        `<td title="${r.conformal}">${formatAccuracy(r.conformal)}</td>` +
        `<td>${r.n}</td></tr>`,
    )
    .join("");
  target.innerHTML =
    `<table><thead><tr><th>movement</th><th>naive</th>` +
    `<th>conformal</th><th>n</th></tr></thead><tbody>${rows}</tbody></table>` +
    `<p>naive ${formatAccuracy(v.naiveMean)} &plusmn; ${formatAccuracy(v.naiveStd)}` +
    ` &middot; conformal ${formatAccuracy(v.conformalMean)} &plusmn; ` +
    `${formatAccuracy(v.conformalStd)}</p>`;
}

store.subscribe(() => {
  renderPanels();
  renderStatus();
  renderCatalog();
  renderReport();
});

// -- canvases ----------------------------------------------------------

const tracesCanvas = $("traces") as HTMLCanvasElement;
const handsCanvas = $("hands") as HTMLCanvasElement;

const loop = new RenderLoop((dtMs) => {
  const tctx = tracesCanvas.getContext("2d");
  if (tctx) {
    drawTraces(tctx, traces, tracesCanvas.width, tracesCanvas.height,
               new Set(outlierChannels(traces)));
  }
  $("drops").textContent = `dropped: ${traces.dropped}`;
  $("fps").textContent = `${loop.fps()} fps`;

  const hctx = handsCanvas.getContext("2d");
  if (!hctx) return;
  hctx.clearRect(0, 0, handsCanvas.width, handsCanvas.height);
  const now = performance.now();
  const guideState = guideEase.step(lastPrediction?.guide ?? guideEase.current,
                                    dtMs / 1000);
  const predState = predEase.step(lastPrediction?.state ?? predEase.current,
                                  dtMs / 1000);
  if (store.displayMode === "cursor_2d") {
    const cls = String(lastPrediction?.solved ?? "rest");
    drawCursor(hctx, cls, 1.0, handsCanvas.width / 2, handsCanvas.height / 2,
               Math.min(handsCanvas.width, handsCanvas.height) * 0.4, "#e8c547");
  } else {
    drawHand(hctx, { ...handGlyph(guideState, guideFresh.ageMs(now)) },
             handsCanvas.width * 0.27, handsCanvas.height * 0.5,
             handsCanvas.height * 0.6, "#f0f0f0");
    drawHand(hctx, { ...handGlyph(predState, predFresh.ageMs(now)) },
             handsCanvas.width * 0.73, handsCanvas.height * 0.5,
             handsCanvas.height * 0.6, "#d9a066");
  }
  const naive = lastPrediction ? String(lastPrediction.naive) : "-";
  const solved = lastPrediction ? String(lastPrediction.solved) : "-";
  const certain = lastPrediction?.certain ? "certain" : "set";
  $("pred-label").textContent =
    lastPrediction ? `${solved} (${certain}; naive ${naive})` : "no predictions";
});

// -- wiring -------------------------------------------------------------

function bind(): void {
  for (const p of PANELS) $(`tab-${p}`).addEventListener("click", () => showPanel(p));
  $("btn-connect").addEventListener("click", () => {
    const host = ($("device-host") as HTMLInputElement).value || "127.0.0.1";
    const port = Number(($("device-port") as HTMLInputElement).value || "5566");
    void actions.connectDevice(host, port);
  });
  $("btn-disconnect").addEventListener("click", () => void actions.disconnect());
  $("btn-record").addEventListener("click", () => {
    const movement = ($("sel-movement") as HTMLSelectElement).value;
    const duration = Number(($("duration") as HTMLInputElement).value || "30");
    void actions.startRecording(movement, duration);
  });
  $("btn-stop").addEventListener("click", () => void actions.stop());
  $("btn-train").addEventListener("click", () => void actions.train());
  $("btn-validate").addEventListener("click", () => {
    const movements = store.state.segments.filter((m) => m !== "rest");
    void actions.startValidation(movements, 6, 45.0);
  });
  $("btn-remap").addEventListener("click", () => {
    const from = ($("sel-remap-from") as HTMLSelectElement).value;
    const to = ($("sel-remap-to") as HTMLSelectElement).value;
    void actions.remapDisplay(from, to);
  });
  $("sel-display-mode").addEventListener("change", () => {
    const mode = ($("sel-display-mode") as HTMLSelectElement).value;
    store.setDisplayMode(mode === "cursor_2d" ? "cursor_2d" : "hands");
  });
  $("chk-conformal").addEventListener("change", () => {
    void actions.setConformal(($("chk-conformal") as HTMLInputElement).checked);
  });
}

window.addEventListener("load", () => {
  bind();
  renderPanels();
  renderStatus();
  client.connect();
  loop.start();
});
