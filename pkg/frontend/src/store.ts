// Mirrored application state and command gating.
//
// The server owns the session state machine; the store only mirrors the
// latest broadcast and derives which controls are enabled. The server may
// still reject a command (authoritative), which lands in the banner.

import {
  MovementInfo,
  Phase,
  SessionState,
  ValidationReportPayload,
} from "./protocol.js";

export type PanelId = "input" | "output" | "workflow";

export interface Gating {
  connect: boolean;
  disconnect: boolean;
  record: boolean;
  stop: boolean;
  train: boolean;
  validate: boolean;
  remap: boolean;
}

export const INITIAL_STATE: SessionState = {
  phase: "disconnected",
  device_connected: false,
  model_ready: false,
  movement: null,
  t_remaining_s: null,
  rep: null,
  n_segments: 0,
  segments: [],
  conformal_enabled: true,
  error: null,
};

const QUIET: Phase[] = ["monitoring", "idle"];

export function gating(s: SessionState): Gating {
  const quiet = QUIET.includes(s.phase);
  return {
    connect: s.phase === "disconnected",
    disconnect: s.phase !== "disconnected",
    record: quiet && s.device_connected,
    stop: s.phase === "recording" || s.phase === "validating",
    train: quiet && s.n_segments >= 1,
    validate: quiet && s.model_ready && s.device_connected,
    remap: quiet || s.phase === "disconnected",
  };
}

export class AppStore {
  state: SessionState = INITIAL_STATE;
  report: ValidationReportPayload | null = null;
  catalog: MovementInfo[] = [];
  activePanel: PanelId = "input";
  banner: string | null = null;
  connected = false; // gateway socket, not the device
  displayMode: "hands" | "cursor_2d" = "hands";
  private watchers: (() => void)[] = [];

  subscribe(fn: () => void): void {
    this.watchers.push(fn);
  }

  private notify(): void {
    for (const fn of this.watchers) fn();
  }

  applyState(s: SessionState): void {
    this.state = s;
    this.notify();
  }

  applyReport(r: ValidationReportPayload): void {
    this.report = r;
    this.notify();
  }

  setCatalog(movements: MovementInfo[]): void {
    this.catalog = movements;
    this.notify();
  }

  setPanel(panel: PanelId): void {
    // exactly one panel visible at a time, by construction
    this.activePanel = panel;
    this.notify();
  }

  setBanner(text: string | null): void {
    this.banner = text;
    this.notify();
  }

  setConnected(up: boolean): void {
    this.connected = up;
    this.notify();
  }

  setDisplayMode(mode: "hands" | "cursor_2d"): void {
    this.displayMode = mode;
    this.notify();
  }

  gating(): Gating {
    const g = gating(this.state);
    if (!this.connected) {
      return { connect: false, disconnect: false, record: false, stop: false,
               train: false, validate: false, remap: false };
    }
    return g;
  }
}

export interface ReportRow {
  movement: string;
  naive: number;
  conformal: number;
  n: number;
}

export interface ReportView {
  rows: ReportRow[];
  naiveMean: number;
  naiveStd: number;
  conformalMean: number;
  conformalStd: number;
  conformalEnabled: boolean;
}

// Exact values from the engine's JSON: no rounding in the view model, the
// renderer formats for humans but keeps the raw numbers in tooltips.
export function reportView(r: ValidationReportPayload): ReportView {
  return {
    rows: r.per_movement.map((m) => ({
      movement: m.movement,
      naive: m.naive_accuracy,
      conformal: m.conformal_accuracy,
      n: m.n_predictions,
    })),
    naiveMean: r.naive_mean,
    naiveStd: r.naive_std,
    conformalMean: r.conformal_mean,
    conformalStd: r.conformal_std,
    conformalEnabled: r.conformal_enabled,
  };
}

export function formatAccuracy(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}
