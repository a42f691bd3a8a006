// Workflow actions: each UI intent becomes one gateway command.
// The store's gating decides button enablement; the server still has the
// final word and rejections surface in the banner.

import { GatewayClient } from "./client.js";
import { MovementInfo } from "./protocol.js";
import { AppStore } from "./store.js";

export class Actions {
  constructor(
    private readonly client: GatewayClient,
    private readonly store: AppStore,
  ) {}

  private async run(fn: () => Promise<unknown>): Promise<boolean> {
    try {
      await fn();
      this.store.setBanner(null);
      return true;
    } catch (e) {
      this.store.setBanner(e instanceof Error ? e.message : String(e));
      return false;
    }
  }

  connectDevice(host: string, port: number): Promise<boolean> {
    return this.run(() => this.client.send("connect_device", { host, port }));
  }

  disconnect(): Promise<boolean> {
    return this.run(() => this.client.send("disconnect"));
  }

  startRecording(movement: string, durationS: number): Promise<boolean> {
    return this.run(() =>
      this.client.send("start_recording", { movement, duration_s: durationS }),
    );
  }

  stop(): Promise<boolean> {
    return this.run(() => this.client.send("stop"));
  }

  train(rounds?: number): Promise<boolean> {
    return this.run(() =>
      this.client.send("train", rounds === undefined ? {} : { rounds }),
    );
  }

  startValidation(movements: string[], reps: number, windowS: number): Promise<boolean> {
    return this.run(() =>
      this.client.send("start_validation",
                       { movements, reps, window_s: windowS }),
    );
  }

  remapDisplay(executed: string, display: string): Promise<boolean> {
    return this.run(async () => {
      await this.client.send("remap_display", { executed, display });
      await this.refreshCatalog();
    });
  }

  setConformal(enabled: boolean): Promise<boolean> {
    return this.run(() =>
      this.client.send("set_config", { "conformal.enabled": enabled }),
    );
  }

  async refreshCatalog(): Promise<boolean> {
    return this.run(async () => {
      const ack = await this.client.send("list_catalog");
      this.store.setCatalog(ack.movements as unknown as MovementInfo[]);
    });
  }
}
