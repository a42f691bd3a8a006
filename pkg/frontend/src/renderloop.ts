// Frame scheduler with an fps meter. requestAnimationFrame in the browser,
// an injectable scheduler in tests.

export type Scheduler = (cb: () => void) => void;

const defaultScheduler: Scheduler =
  typeof requestAnimationFrame === "function"
    ? (cb) => requestAnimationFrame(() => cb())
    : (cb) => setTimeout(cb, 16);

export class RenderLoop {
  private running = false;
  private frameTimes: number[] = [];
  renders = 0;

  constructor(
    private readonly draw: (dtMs: number) => void,
    private readonly schedule: Scheduler = defaultScheduler,
    private readonly now: () => number = () => performance.now(),
  ) {}

  start(): void {
    if (this.running) return;
    this.running = true;
    let last = this.now();
    const tick = () => {
      if (!this.running) return;
      const t = this.now();
      this.draw(t - last);
      last = t;
      this.renders += 1;
      this.frameTimes.push(t);
      const cutoff = t - 1000;
      while (this.frameTimes.length && this.frameTimes[0] < cutoff) {
        this.frameTimes.shift();
      }
      this.schedule(tick);
    };
    this.schedule(tick);
  }

  stop(): void {
    this.running = false;
  }

  /** Renders completed in the trailing second. */
  fps(): number {
    return this.frameTimes.length;
  }
}
