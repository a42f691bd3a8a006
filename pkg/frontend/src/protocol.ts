// Gateway wire protocol: JSON envelopes over /ws.
// Commands carry a client seq and get exactly one ack/error back with the
// same seq; broadcasts carry the server's own monotonic seq.

export type Phase =
  | "disconnected"
  | "monitoring"
  | "recording"
  | "training"
  | "validating"
  | "idle";

export interface SessionState {
  phase: Phase;
  device_connected: boolean;
  model_ready: boolean;
  movement: string | null;
  t_remaining_s: number | null;
  rep: number | null;
  n_segments: number;
  segments: string[];
  conformal_enabled: boolean;
  error: string | null;
}

export interface PlotPayload {
  t_us: number;
  chunks: number[][][]; // each chunk: 32 channels x [min0, max0, min1, max1]
  dropped: number;
}

export interface PredictionPayload {
  t_us: number;
  naive: string | number;
  solved: string | number;
  probs: number[];
  set: (string | number)[];
  certain: boolean;
  state: number[]; // decoded 9D display state
  guide: number[]; // latest guide 9D state
}

export interface MovementResultPayload {
  movement: string;
  naive_accuracy: number;
  conformal_accuracy: number;
  n_predictions: number;
}

export interface ValidationReportPayload {
  per_movement: MovementResultPayload[];
  naive_mean: number;
  naive_std: number;
  conformal_mean: number;
  conformal_std: number;
  conformal_enabled: boolean;
  durations_s: Record<string, number>;
}

export interface MovementInfo {
  id: string;
  target: number[];
  display_id: string | null;
}

export type ServerMessage =
  | { type: "state"; seq: number; payload: SessionState }
  | { type: "plot"; seq: number; payload: PlotPayload }
  | { type: "prediction"; seq: number; payload: PredictionPayload }
  | { type: "validation_report"; seq: number; payload: ValidationReportPayload }
  | { type: "ack"; seq: number; payload: Record<string, unknown> }
  | {
      type: "error";
      seq: number;
      payload: { command: string; error: string; detail: string; phase: Phase };
    };

export type CommandType =
  | "connect_device"
  | "disconnect"
  | "start_recording"
  | "stop_recording"
  | "train"
  | "start_validation"
  | "stop"
  | "set_config"
  | "list_catalog"
  | "remap_display";

export function parseServerMessage(raw: string): ServerMessage | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  if (typeof m.type !== "string" || !("payload" in m)) return null;
  return m as unknown as ServerMessage;
}
