// Wire types for the simulator's line-delimited JSON control/telemetry port.
// The dashboard consumes this protocol only; it never imports simulator code.

export type Mode = "cti" | "sr";

/** One telemetry window snapshot, broadcast at 10 Hz. */
export interface WindowFrame {
  type: "window";
  gen: number;
  sim_time_ns: number;
  paused: boolean;
  wall_slip_ms: number;
  window_start_ns: number;
  mode: Mode;
  samples: number;
  mean_q_us: number | null;
  p50_q_us: number | null;
  p95_q_us: number | null;
  p99_q_us: number | null;
  mean_t_us: number | null;
  util: number;
  granted_B: number;
  used_B: number;
  wasted_B: number;
  cti_msgs: number;
  drops: number;
}

export interface CtiFrameEntry {
  tcont: number;
  bytes: number;
  arrival_start_ns: number;
  arrival_end_ns: number;
}

/** One CTI report as the OLT received it. */
export interface CtiFrame {
  type: "cti";
  gen: number;
  seq: number;
  report_time_ns: number;
  entries: CtiFrameEntry[];
}

export interface FinishedFrame {
  type: "finished";
  gen: number;
  sim_time_ns: number;
}

/** Command acknowledgement or rejection. Replies carry no type field. */
export interface CommandReply {
  ok: boolean;
  effective_at_ns?: number;
  gen?: number;
  error?: string;
}

export type ServerMessage = WindowFrame | CtiFrame | FinishedFrame | CommandReply;

export type Command =
  | { cmd: "set_mode"; mode: Mode }
  | { cmd: "set_traffic_scale"; ue: number | "all"; scale: number }
  | { cmd: "pause" }
  | { cmd: "resume" }
  | { cmd: "reset" };

export function parseMessage(line: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const msg = obj as Record<string, unknown>;
  if (msg.type === "window" || msg.type === "cti" || msg.type === "finished") {
    return msg as unknown as ServerMessage;
  }
  if (typeof msg.ok === "boolean") {
    return msg as unknown as CommandReply;
  }
  return null;
}

export function isWindow(msg: ServerMessage): msg is WindowFrame {
  return (msg as WindowFrame).type === "window";
}

export function isCti(msg: ServerMessage): msg is CtiFrame {
  return (msg as CtiFrame).type === "cti";
}

export function isFinished(msg: ServerMessage): msg is FinishedFrame {
  return (msg as FinishedFrame).type === "finished";
}

export function isReply(msg: ServerMessage): msg is CommandReply {
  return typeof (msg as CommandReply).ok === "boolean";
}
