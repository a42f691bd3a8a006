// Rolling multichannel envelope buffer for the live 32-trace display.
//
// The gateway streams peak-keeping min/max pairs (4 values per 18-sample
// frame, so 2 envelope samples per frame per channel). We keep ~5 s per
// channel in ring buffers and resample to pixel columns at draw time.

export const CHANNELS = 32;
const PAIRS_PER_FRAME = 2; // [min0,max0], [min1,max1]
const FRAMES_PER_S = 111.11;

export interface Column {
  min: number;
  max: number;
}

export class TraceBuffer {
  readonly capacity: number;
  private mins: Float32Array[];
  private maxs: Float32Array[];
  private head = 0; // next write slot
  private count = 0;
  dropped = 0;

  constructor(public readonly windowS = 5.0, public readonly channels = CHANNELS) {
    this.capacity = Math.ceil(windowS * FRAMES_PER_S * PAIRS_PER_FRAME);
    this.mins = Array.from({ length: channels }, () => new Float32Array(this.capacity));
    this.maxs = Array.from({ length: channels }, () => new Float32Array(this.capacity));
  }

  get length(): number {
    return this.count;
  }

  pushChunks(chunks: number[][][], dropped?: number): void {
    for (const chunk of chunks) {
      for (let pair = 0; pair < PAIRS_PER_FRAME; pair++) {
        const slot = this.head;
        for (let ch = 0; ch < this.channels; ch++) {
          const vals = chunk[ch];
          this.mins[ch][slot] = vals[2 * pair];
          this.maxs[ch][slot] = vals[2 * pair + 1];
        }
        this.head = (this.head + 1) % this.capacity;
        if (this.count < this.capacity) this.count += 1;
      }
    }
    if (dropped !== undefined) this.dropped = dropped;
  }

  // oldest-first logical index -> ring slot
  private slot(i: number): number {
    const start = (this.head - this.count + this.capacity * 2) % this.capacity;
    return (start + i) % this.capacity;
  }

  /** Resample one channel's window into `width` min/max columns. */
  columns(ch: number, width: number): Column[] {
    const out: Column[] = [];
    if (this.count === 0 || width <= 0) return out;
    const per = this.count / width;
    for (let x = 0; x < width; x++) {
      const lo = Math.floor(x * per);
      const hi = Math.max(lo + 1, Math.floor((x + 1) * per));
      let mn = Infinity;
      let mx = -Infinity;
      for (let i = lo; i < Math.min(hi, this.count); i++) {
        const s = this.slot(i);
        if (this.mins[ch][s] < mn) mn = this.mins[ch][s];
        if (this.maxs[ch][s] > mx) mx = this.maxs[ch][s];
      }
      if (mn !== Infinity) out.push({ min: mn, max: mx });
    }
    return out;
  }

  /** Peak-to-peak amplitude of a channel over the buffered window. */
  amplitude(ch: number): number {
    let mn = Infinity;
    let mx = -Infinity;
    for (let i = 0; i < this.count; i++) {
      const s = this.slot(i);
      if (this.mins[ch][s] < mn) mn = this.mins[ch][s];
      if (this.maxs[ch][s] > mx) mx = this.maxs[ch][s];
    }
    return this.count ? mx - mn : 0;
  }

  amplitudes(): number[] {
    return Array.from({ length: this.channels }, (_, ch) => this.amplitude(ch));
  }
}

export function median(xs: number[]): number {
  if (xs.length === 0) return 0;
  const s = [...xs].sort((a, b) => a - b);
  const mid = Math.floor(s.length / 2);
  return s.length % 2 ? s[mid] : 0.5 * (s[mid - 1] + s[mid]);
}

/** Channels whose amplitude exceeds `factor` x the median: likely bad contacts. */
export function outlierChannels(buf: TraceBuffer, factor = 5.0): number[] {
  const amps = buf.amplitudes();
  const med = median(amps);
  if (med === 0) return [];
  return amps.map((a, ch) => (a > factor * med ? ch : -1)).filter((c) => c >= 0);
}
