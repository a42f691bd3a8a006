import { describe, expect, it, vi } from "vitest";

import { CommandError, GatewayClient, WebSocketLike } from "../src/client.js";

class FakeSocket implements WebSocketLike {
  onopen: ((ev: any) => void) | null = null;
  onclose: ((ev: any) => void) | null = null;
  onerror: ((ev: any) => void) | null = null;
  onmessage: ((ev: any) => void) | null = null;
  sent: string[] = [];

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.onclose?.({});
  }

  reply(obj: unknown): void {
    this.onmessage?.({ data: JSON.stringify(obj) });
  }
}

function makeClient(): { client: GatewayClient; sockets: FakeSocket[] } {
  const sockets: FakeSocket[] = [];
  const client = new GatewayClient("ws://test/ws", () => {
    const s = new FakeSocket();
    sockets.push(s);
    return s;
  });
  return { client, sockets };
}

describe("GatewayClient", () => {
  it("correlates ack with command seq", async () => {
    const { client, sockets } = makeClient();
    client.connect();
    const sock = sockets[0];
    sock.onopen?.({});
    const p = client.send("list_catalog");
    const { seq } = JSON.parse(sock.sent[0]);
    sock.reply({ type: "ack", seq, payload: { movements: [] } });
    await expect(p).resolves.toEqual({ movements: [] });
  });

  it("rejects with the in-band error", async () => {
    const { client, sockets } = makeClient();
    client.connect();
    const sock = sockets[0];
    const p = client.send("start_recording", { movement: "thumb" });
    const { seq } = JSON.parse(sock.sent[0]);
    sock.reply({
      type: "error",
      seq,
      payload: { command: "start_recording", error: "InvalidTransition",
                 detail: "nope", phase: "disconnected" },
    });
    await expect(p).rejects.toBeInstanceOf(CommandError);
    await p.catch((e: CommandError) => {
      expect(e.errorType).toBe("InvalidTransition");
      expect(e.phase).toBe("disconnected");
    });
  });

  it("routes broadcasts to listeners", () => {
    const { client, sockets } = makeClient();
    const seen: string[] = [];
    client.on("state", (s) => seen.push(s.phase));
    client.connect();
    sockets[0].reply({ type: "state", seq: 1,
                       payload: { phase: "monitoring" } });
    expect(seen).toEqual(["monitoring"]);
  });

  it("reconnects with backoff after unexpected close", async () => {
    vi.useFakeTimers();
    try {
      const { client, sockets } = makeClient();
      const attempts: number[] = [];
      client.on("reconnecting", (attempt, delay) => attempts.push(delay));
      client.connect();
      sockets[0].onclose?.({});
      expect(attempts).toEqual([500]);
      vi.advanceTimersByTime(500);
      expect(sockets.length).toBe(2);
      sockets[1].onclose?.({});
      expect(attempts).toEqual([500, 1000]);
    } finally {
      vi.useRealTimers();
    }
  });

  it("does not reconnect after user close", () => {
    const { client, sockets } = makeClient();
    const attempts: number[] = [];
    client.on("reconnecting", () => attempts.push(1));
    client.connect();
    client.close();
    expect(attempts).toEqual([]);
  });

  it("ignores malformed frames", () => {
    const { client, sockets } = makeClient();
    client.connect();
    expect(() => sockets[0].onmessage?.({ data: "not json" })).not.toThrow();
    expect(() => sockets[0].onmessage?.({ data: "42" })).not.toThrow();
  });
});
