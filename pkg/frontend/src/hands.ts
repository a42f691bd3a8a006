// Hand glyph view-model: the 9D state becomes per-digit flexion arcs.
//
// Component order: thumb flexion, thumb abduction, index/middle/ring/pinky
// flexion, wrist flexion, wrist adduction, wrist pronation. The glyph is a
// simplified 2D hand (palm + five digit arcs); wrist components render as
// bars under the palm. Prediction states get client-side easing so a 32 Hz
// stream still animates smoothly; a stream silent for > 500 ms grays out.

export const STATE_DIM = 9;

export interface DigitArc {
  name: string;
  flexion: number; // 0..1
  angleRad: number; // 0 (straight) .. ~1.6 (curled)
}

export interface HandGlyph {
  digits: DigitArc[]; // thumb..pinky
  thumbAbduction: number;
  wrist: { flexion: number; adduction: number; pronation: number };
  stale: boolean;
}

const DIGITS = ["thumb", "index", "middle", "ring", "pinky"] as const;
const DIGIT_COMPONENT = [0, 2, 3, 4, 5];
const MAX_CURL_RAD = 1.6;
export const STALE_AFTER_MS = 500;

export function handGlyph(state: number[], ageMs = 0): HandGlyph {
  const digits = DIGITS.map((name, i) => {
    const flexion = clamp01(state[DIGIT_COMPONENT[i]] ?? 0);
    return { name, flexion, angleRad: flexion * MAX_CURL_RAD };
  });
  return {
    digits,
    thumbAbduction: clamp01(state[1] ?? 0),
    wrist: {
      flexion: clamp01(state[6] ?? 0),
      adduction: clamp01(state[7] ?? 0),
      pronation: clamp01(state[8] ?? 0),
    },
    stale: ageMs > STALE_AFTER_MS,
  };
}

function clamp01(x: number): number {
  return Math.min(1, Math.max(0, x));
}

/** Componentwise glide toward the target with per-step change <= dt/duration. */
export class Easing {
  current: number[];

  constructor(public durationS = 0.15, initial?: number[]) {
    this.current = initial ? [...initial] : new Array(STATE_DIM).fill(0);
  }

  step(target: number[], dtS: number): number[] {
    if (this.durationS <= 0) {
      this.current = [...target];
      return [...this.current];
    }
    const frac = Math.min(1, dtS / this.durationS);
    this.current = this.current.map((c, i) => {
      const t = target[i] ?? 0;
      return c + Math.sign(t - c) * Math.min(Math.abs(t - c), frac * Math.abs(t - c));
    });
    return [...this.current];
  }
}

/** Tracks the freshness of a broadcast stream. */
export class Freshness {
  private lastMs = -Infinity;

  touch(nowMs: number): void {
    this.lastMs = nowMs;
  }

  ageMs(nowMs: number): number {
    return nowMs - this.lastMs;
  }

  stale(nowMs: number): boolean {
    return this.ageMs(nowMs) > STALE_AFTER_MS;
  }
}
