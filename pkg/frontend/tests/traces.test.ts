import { describe, expect, it } from "vitest";

import { TraceBuffer, median, outlierChannels } from "../src/traces.js";

function chunk(fill: number, channels = 32): number[][] {
  return Array.from({ length: channels }, () => [-fill, fill, -fill, fill]);
}

function chunkFor(values: (ch: number) => number, channels = 32): number[][] {
  return Array.from({ length: channels }, (_, ch) => {
    const v = values(ch);
    return [-v, v, -v, v];
  });
}

describe("TraceBuffer", () => {
  it("capacity covers five seconds of envelope pairs", () => {
    const buf = new TraceBuffer(5.0);
    expect(buf.capacity).toBeGreaterThanOrEqual(1111);
  });

  it("ring keeps the newest window", () => {
    const buf = new TraceBuffer(0.1); // 23 slots
    for (let i = 0; i < 60; i++) buf.pushChunks([chunk(i)]);
    expect(buf.length).toBe(buf.capacity);
    const cols = buf.columns(0, 1);
    expect(cols[0].max).toBe(59);
    expect(cols[0].min).toBeLessThanOrEqual(-48);
  });

  it("columns resample preserves extremes", () => {
    const buf = new TraceBuffer(5.0);
    for (let i = 0; i < 200; i++) buf.pushChunks([chunk(i === 117 ? 5000 : 10)]);
    const cols = buf.columns(3, 40);
    const maxSeen = Math.max(...cols.map((c) => c.max));
    expect(maxSeen).toBe(5000); // spikes survive decimation to pixels
  });

  it("tracks the server-side drop counter", () => {
    const buf = new TraceBuffer();
    buf.pushChunks([chunk(1)], 7);
    expect(buf.dropped).toBe(7);
  });

  it("amplitude is peak to peak", () => {
    const buf = new TraceBuffer();
    buf.pushChunks([chunkFor((ch) => (ch === 2 ? 100 : 10))]);
    expect(buf.amplitude(2)).toBe(200);
    expect(buf.amplitude(0)).toBe(20);
  });
});

describe("outlier channels", () => {
  it("flags no-contact electrodes above 5x the median", () => {
    const buf = new TraceBuffer();
    for (let i = 0; i < 50; i++) {
      buf.pushChunks([chunkFor((ch) => (ch === 1 || ch === 17 ? 2500 : 100))]);
    }
    expect(outlierChannels(buf, 5.0)).toEqual([1, 17]);
  });

  it("median of even and odd lengths", () => {
    expect(median([1, 9, 5])).toBe(5);
    expect(median([1, 3, 5, 9])).toBe(4);
    expect(median([])).toBe(0);
  });
});
