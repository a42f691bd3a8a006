// WebSocket gateway client: command/ack correlation and auto-reconnect.
//
// The server is authoritative; every command resolves with its ack payload
// or rejects with the in-band error. On unexpected close the client retries
// with exponential backoff and surfaces the attempts so the UI can show a
// banner.

import {
  CommandType,
  parseServerMessage,
  PlotPayload,
  PredictionPayload,
  SessionState,
  ValidationReportPayload,
} from "./protocol.js";

// Structural subset of both the browser WebSocket and the `ws` package;
// handler params stay `any` so either implementation assigns cleanly.
export interface WebSocketLike {
  onopen: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface ClientEvents {
  state: (s: SessionState) => void;
  plot: (p: PlotPayload) => void;
  prediction: (p: PredictionPayload) => void;
  validation_report: (r: ValidationReportPayload) => void;
  open: () => void;
  close: () => void;
  reconnecting: (attempt: number, delayMs: number) => void;
}

export class CommandError extends Error {
  constructor(
    public readonly errorType: string,
    public readonly detail: string,
    public readonly phase: string,
  ) {
    super(`${errorType}: ${detail}`);
  }
}

const BACKOFF_MS = [500, 1000, 2000, 5000];
const COMMAND_TIMEOUT_MS = 30_000;

export class GatewayClient {
  private ws: WebSocketLike | null = null;
  private seq = 0;
  private pending = new Map<
    number,
    { resolve: (v: Record<string, unknown>) => void; reject: (e: Error) => void; timer: ReturnType<typeof setTimeout> }
  >();
  private listeners: { [K in keyof ClientEvents]: ClientEvents[K][] } = {
    state: [], plot: [], prediction: [], validation_report: [],
    open: [], close: [], reconnecting: [],
  };
  private closedByUser = false;
  private attempt = 0;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    public readonly url: string,
    private readonly makeSocket: WebSocketFactory,
  ) {}

  on<K extends keyof ClientEvents>(event: K, fn: ClientEvents[K]): void {
    this.listeners[event].push(fn);
  }

  private emit<K extends keyof ClientEvents>(
    event: K,
    ...args: Parameters<ClientEvents[K]>
  ): void {
    for (const fn of this.listeners[event]) (fn as (...a: unknown[]) => void)(...args);
  }

  connect(): void {
    this.closedByUser = false;
    const ws = this.makeSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.emit("open");
    };
    ws.onmessage = (ev) => this.handleMessage(String(ev.data));
    ws.onclose = () => {
      this.failPending(new Error("connection closed"));
      this.emit("close");
      if (!this.closedByUser) this.scheduleReconnect();
    };
    ws.onerror = () => {
      /* onclose follows; nothing to do here */
    };
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.ws?.close();
  }

  private scheduleReconnect(): void {
    const delay = BACKOFF_MS[Math.min(this.attempt, BACKOFF_MS.length - 1)];
    this.attempt += 1;
    this.emit("reconnecting", this.attempt, delay);
    this.reconnectTimer = setTimeout(() => this.connect(), delay);
  }

  private failPending(err: Error): void {
    for (const [, p] of this.pending) {
      clearTimeout(p.timer);
      p.reject(err);
    }
    this.pending.clear();
  }

  private handleMessage(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) return;
    switch (msg.type) {
      case "ack": {
        const p = this.pending.get(msg.seq);
        if (p) {
          this.pending.delete(msg.seq);
          clearTimeout(p.timer);
          p.resolve(msg.payload);
        }
        break;
      }
      case "error": {
        const p = this.pending.get(msg.seq);
        if (p) {
          this.pending.delete(msg.seq);
          clearTimeout(p.timer);
          p.reject(new CommandError(msg.payload.error, msg.payload.detail,
                                    msg.payload.phase));
        }
        break;
      }
      case "state":
        this.emit("state", msg.payload);
        break;
      case "plot":
        this.emit("plot", msg.payload);
        break;
      case "prediction":
        this.emit("prediction", msg.payload);
        break;
      case "validation_report":
        this.emit("validation_report", msg.payload);
        break;
    }
  }

  send(
    type: CommandType,
    payload: Record<string, unknown> = {},
  ): Promise<Record<string, unknown>> {
    const seq = ++this.seq;
    return new Promise((resolve, reject) => {
      if (this.ws === null) {
        reject(new Error("not connected"));
        return;
      }
      const timer = setTimeout(() => {
        this.pending.delete(seq);
        reject(new Error(`${type}: no reply within ${COMMAND_TIMEOUT_MS} ms`));
      }, COMMAND_TIMEOUT_MS);
      this.pending.set(seq, { resolve, reject, timer });
      this.ws.send(JSON.stringify({ type, seq, payload }));
    });
  }

  handleRaw(raw: string): void {
    // test hook: inject a server message without a socket
    this.handleMessage(raw);
  }
}
