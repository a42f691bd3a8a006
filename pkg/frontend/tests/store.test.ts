import { describe, expect, it } from "vitest";

import { SessionState } from "../src/protocol.js";
import { AppStore, INITIAL_STATE, formatAccuracy, gating, reportView } from "../src/store.js";

function state(over: Partial<SessionState>): SessionState {
  return { ...INITIAL_STATE, ...over };
}

describe("gating", () => {
  it("only connect is possible while disconnected", () => {
    const g = gating(state({}));
    expect(g.connect).toBe(true);
    expect(g.record).toBe(false);
    expect(g.train).toBe(false);
    expect(g.validate).toBe(false);
    expect(g.stop).toBe(false);
  });

  it("monitoring with device enables record", () => {
    const g = gating(state({ phase: "monitoring", device_connected: true }));
    expect(g.record).toBe(true);
    expect(g.train).toBe(false); // nothing recorded yet
  });

  it("train needs at least one segment", () => {
    const g = gating(state({ phase: "monitoring", device_connected: true,
                             n_segments: 1, segments: ["thumb"] }));
    expect(g.train).toBe(true);
  });

  it("record buttons disabled while training", () => {
    const g = gating(state({ phase: "training", device_connected: true,
                             n_segments: 2 }));
    expect(g.record).toBe(false);
    expect(g.train).toBe(false);
    expect(g.validate).toBe(false);
  });

  it("validate needs a model and a device", () => {
    expect(gating(state({ phase: "idle", device_connected: true,
                          model_ready: true })).validate).toBe(true);
    expect(gating(state({ phase: "idle", device_connected: true })).validate)
      .toBe(false);
  });

  it("stop only during recording or validating", () => {
    expect(gating(state({ phase: "recording" })).stop).toBe(true);
    expect(gating(state({ phase: "validating" })).stop).toBe(true);
    expect(gating(state({ phase: "idle" })).stop).toBe(false);
  });

  it("everything is disabled when the gateway socket is down", () => {
    const store = new AppStore();
    store.applyState(state({ phase: "monitoring", device_connected: true,
                             n_segments: 1 }));
    store.setConnected(false);
    const g = store.gating();
    expect(Object.values(g).every((v) => v === false)).toBe(true);
  });
});

describe("panels", () => {
  it("exactly one active panel at a time", () => {
    const store = new AppStore();
    expect(store.activePanel).toBe("input");
    store.setPanel("workflow");
    expect(store.activePanel).toBe("workflow");
    store.setPanel("output");
    expect(store.activePanel).toBe("output");
  });
});

describe("report view", () => {
  it("keeps engine values exactly, no rounding", () => {
    const payload = {
      per_movement: [
        { movement: "thumb", naive_accuracy: 0.9826034793041392,
          conformal_accuracy: 0.9826034793041392, n_predictions: 1667 },
      ],
      naive_mean: 0.9826034793041392,
      naive_std: 0.0,
      conformal_mean: 0.9826034793041392,
      conformal_std: 0.0,
      conformal_enabled: true,
      durations_s: { train_s: 0.5 },
    };
    const v = reportView(payload);
    expect(v.rows[0].naive).toBe(payload.per_movement[0].naive_accuracy);
    expect(v.naiveMean).toBe(payload.naive_mean);
    expect(formatAccuracy(v.rows[0].naive)).toBe("98.3%");
  });
});
