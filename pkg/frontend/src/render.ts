// Canvas drawing. Takes a minimal 2D-context interface so tests can pass a
// recording stub; the browser passes a real CanvasRenderingContext2D.

import { cursorFromClass } from "./cursor.js";
import { HandGlyph } from "./hands.js";
import { TraceBuffer } from "./traces.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

const TRACE_COLOR = "#3fa7d6";
const OUTLIER_COLOR = "#e84855";
const GRID_COLOR = "#2a2e35";
const TEXT_COLOR = "#8a919c";

export function drawTraces(
  ctx: Ctx2D,
  buf: TraceBuffer,
  width: number,
  height: number,
  outliers: Set<number> = new Set(),
): void {
  ctx.clearRect(0, 0, width, height);
  const laneH = height / buf.channels;
  const labelW = 28;
  const plotW = width - labelW;
  // shared scale so loose electrodes stand out instead of autoscaling away
  const amps = buf.amplitudes();
  const scale = Math.max(1, median_(amps) * 3);
  for (let ch = 0; ch < buf.channels; ch++) {
    const y0 = ch * laneH;
    ctx.strokeStyle = GRID_COLOR;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(labelW, y0 + laneH);
    ctx.lineTo(width, y0 + laneH);
    ctx.stroke();
    ctx.fillStyle = outliers.has(ch) ? OUTLIER_COLOR : TEXT_COLOR;
    ctx.font = "9px monospace";
    ctx.fillText(String(ch), 4, y0 + laneH * 0.65);

    const cols = buf.columns(ch, Math.floor(plotW));
    ctx.strokeStyle = outliers.has(ch) ? OUTLIER_COLOR : TRACE_COLOR;
    ctx.lineWidth = 1;
    ctx.beginPath();
    const mid = y0 + laneH / 2;
    const half = laneH / 2 - 1;
    for (let x = 0; x < cols.length; x++) {
      const lo = mid - clampUnit(cols[x].min / scale) * half;
      const hi = mid - clampUnit(cols[x].max / scale) * half;
      ctx.moveTo(labelW + x, lo);
      ctx.lineTo(labelW + x, hi === lo ? hi - 0.5 : hi);
    }
    ctx.stroke();
  }
}

function clampUnit(x: number): number {
  return Math.min(1, Math.max(-1, x));
}

function median_(xs: number[]): number {
  const s = [...xs].sort((a, b) => a - b);
  if (!s.length) return 0;
  const m = Math.floor(s.length / 2);
  return s.length % 2 ? s[m] : 0.5 * (s[m - 1] + s[m]);
}

export function drawHand(
  ctx: Ctx2D,
  glyph: HandGlyph,
  cx: number,
  cy: number,
  size: number,
  color: string,
): void {
  const tone = glyph.stale ? "#555b63" : color;
  // palm
  ctx.strokeStyle = tone;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(cx, cy, size * 0.32, 0, 2 * Math.PI);
  ctx.stroke();
  // five digits around the palm top; flexion curls the arc inward
  const baseAngles = [-2.5, -1.9, -1.55, -1.2, -0.7]; // thumb..pinky, radians
  glyph.digits.forEach((d, i) => {
    const a = baseAngles[i] + (i === 0 ? glyph.thumbAbduction * 0.35 : 0);
    const x0 = cx + Math.cos(a) * size * 0.32;
    const y0 = cy + Math.sin(a) * size * 0.32;
    const len = size * (i === 0 ? 0.3 : 0.42) * (1 - 0.55 * d.flexion);
    const x1 = x0 + Math.cos(a) * len;
    const y1 = y0 + Math.sin(a) * len;
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
    // curled tip
    ctx.beginPath();
    ctx.arc(x1, y1, Math.max(1.5, size * 0.06 * d.flexion), 0, 2 * Math.PI);
    ctx.fillStyle = tone;
    ctx.fill();
  });
  // wrist bars
  const bars = [glyph.wrist.flexion, glyph.wrist.adduction, glyph.wrist.pronation];
  bars.forEach((v, i) => {
    ctx.fillStyle = tone;
    ctx.fillRect(cx - size * 0.3 + i * size * 0.22, cy + size * 0.42,
                 size * 0.18 * Math.max(0.06, v), 4);
  });
}

export function drawCursor(
  ctx: Ctx2D,
  classId: string,
  activation: number,
  cx: number,
  cy: number,
  size: number,
  color: string,
): void {
  ctx.strokeStyle = GRID_COLOR;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(cx - size, cy);
  ctx.lineTo(cx + size, cy);
  ctx.moveTo(cx, cy - size);
  ctx.lineTo(cx, cy + size);
  ctx.stroke();
  const p = cursorFromClass(classId, activation);
  ctx.beginPath();
  ctx.arc(cx + p.x * size, cy - p.y * size, 6, 0, 2 * Math.PI);
  ctx.fillStyle = color;
  ctx.fill();
}
