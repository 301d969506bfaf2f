// Session state machine: owns the connection, the command round trip, and
// the bounded rolling buffers every view renders from. Transport and timers
// are injected so tests can drive the session from recorded frames.

import {
  Command,
  CommandReply,
  CtiFrame,
  Mode,
  ServerMessage,
  WindowFrame,
  isCti,
  isFinished,
  isReply,
  isWindow,
  parseMessage,
} from "./protocol.js";

export const WINDOW_RING_LIMIT = 600;
export const CTI_LOG_LIMIT = 200;
const BACKOFF_INITIAL_MS = 1000;
const BACKOFF_MAX_MS = 30000;

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface Connection {
  send(line: string): void;
  close(): void;
}

export interface ConnectionHandlers {
  onOpen(): void;
  onLine(line: string): void;
  onClose(): void;
}

/** Anything that can open a line-delimited message channel to the server. */
export interface Transport {
  open(handlers: ConnectionHandlers): Connection;
}

export interface Timer {
  setTimeout(fn: () => void, ms: number): number;
  clearTimeout(id: number): void;
}

/** A vertical chart annotation for an acknowledged mode change. */
export interface ModeMarker {
  atNs: number;
  mode: Mode;
}

interface PendingCommand {
  command: Command;
  /** Mode shown before the command was sent, restored on failure. */
  priorMode: Mode | null;
}

export interface SessionEvents {
  onChange?(): void;
  onError?(message: string): void;
}

export class DashboardSession {
  status: ConnectionStatus = "disconnected";
  /** Last acknowledged mode; null until the first window or ack arrives. */
  mode: Mode | null = null;
  pendingCommands = 0;
  paused = false;
  finished = false;
  generation = 0;
  wallSlipMs = 0;
  retryInMs: number | null = null;

  windows: WindowFrame[] = [];
  ctiLog: CtiFrame[] = [];
  markers: ModeMarker[] = [];
  trafficScales: Map<number | "all", number> = new Map();

  private connection: Connection | null = null;
  private pending: PendingCommand[] = [];
  private backoffMs = BACKOFF_INITIAL_MS;
  private retryHandle: number | null = null;

  constructor(
    private transport: Transport,
    private timer: Timer,
    private events: SessionEvents = {},
  ) {}

  connect(): void {
    if (this.status !== "disconnected") return;
    if (this.retryHandle !== null) {
      this.timer.clearTimeout(this.retryHandle);
      this.retryHandle = null;
    }
    this.retryInMs = null;
    this.status = "connecting";
    this.notify();
    this.connection = this.transport.open({
      onOpen: () => {
        this.status = "connected";
        this.backoffMs = BACKOFF_INITIAL_MS;
        this.notify();
      },
      onLine: (line) => this.handleLine(line),
      onClose: () => this.handleDrop(),
    });
  }

  disconnect(): void {
    if (this.retryHandle !== null) {
      this.timer.clearTimeout(this.retryHandle);
      this.retryHandle = null;
    }
    this.retryInMs = null;
    const conn = this.connection;
    this.connection = null;
    this.status = "disconnected";
    conn?.close();
    this.notify();
  }

  send(command: Command): void {
    if (this.status !== "connected" || !this.connection) {
      this.events.onError?.("not connected");
      return;
    }
    this.pending.push({
      command,
      priorMode: command.cmd === "set_mode" ? this.mode : null,
    });
    this.pendingCommands = this.pending.length;
    this.connection.send(JSON.stringify(command));
    this.notify();
  }

  private handleDrop(): void {
    if (this.status === "disconnected") return; // explicit disconnect already ran
    this.connection = null;
    this.status = "disconnected";
    // In-flight commands will never be answered on the dead socket.
    this.pending = [];
    this.pendingCommands = 0;
    this.retryInMs = this.backoffMs;
    this.retryHandle = this.timer.setTimeout(() => {
      this.retryHandle = null;
      this.connect();
    }, this.backoffMs);
    this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
    this.notify();
  }

  private handleLine(line: string): void {
    const msg = parseMessage(line);
    if (msg === null) return;
    this.handleMessage(msg);
  }

  handleMessage(msg: ServerMessage): void {
    if (isReply(msg)) {
      this.handleReply(msg);
    } else if (isWindow(msg)) {
      if (!this.acceptGeneration(msg.gen)) return;
      this.ingestWindow(msg);
    } else if (isCti(msg)) {
      if (!this.acceptGeneration(msg.gen)) return;
      this.ctiLog.push(msg);
      if (this.ctiLog.length > CTI_LOG_LIMIT) {
        this.ctiLog.splice(0, this.ctiLog.length - CTI_LOG_LIMIT);
      }
    } else if (isFinished(msg)) {
      if (!this.acceptGeneration(msg.gen)) return;
      this.finished = true;
    }
    this.notify();
  }

  /** Frames from before the last reset are stale; newer generations flush. */
  private acceptGeneration(gen: number): boolean {
    if (gen < this.generation) return false;
    if (gen > this.generation) {
      this.generation = gen;
      this.windows = [];
      this.ctiLog = [];
      this.markers = [];
      this.finished = false;
    }
    return true;
  }

  private ingestWindow(frame: WindowFrame): void {
    this.paused = frame.paused;
    this.wallSlipMs = frame.wall_slip_ms;
    if (this.mode === null) this.mode = frame.mode;
    const idx = this.windows.findIndex(
      (w) => w.window_start_ns === frame.window_start_ns,
    );
    if (idx >= 0) {
      this.windows[idx] = frame; // same window re-broadcast: update in place
    } else {
      this.windows.push(frame);
      this.windows.sort((a, b) => a.window_start_ns - b.window_start_ns);
      if (this.windows.length > WINDOW_RING_LIMIT) {
        this.windows.splice(0, this.windows.length - WINDOW_RING_LIMIT);
      }
    }
  }

  private handleReply(reply: CommandReply): void {
    const pending = this.pending.shift(); // replies arrive in send order
    this.pendingCommands = this.pending.length;
    if (!pending) return;
    if (!reply.ok) {
      if (pending.command.cmd === "set_mode" && pending.priorMode !== null) {
        this.mode = pending.priorMode;
      }
      this.events.onError?.(reply.error ?? "command failed");
      return;
    }
    const cmd = pending.command;
    switch (cmd.cmd) {
      case "set_mode":
        this.mode = cmd.mode;
        if (reply.effective_at_ns !== undefined) {
          this.markers.push({ atNs: reply.effective_at_ns, mode: cmd.mode });
        }
        break;
      case "set_traffic_scale":
        this.trafficScales.set(cmd.ue, cmd.scale);
        break;
      case "pause":
        this.paused = true;
        break;
      case "resume":
        this.paused = false;
        break;
      case "reset":
        if (reply.gen !== undefined) this.acceptGeneration(reply.gen);
        this.finished = false;
        this.paused = false;
        break;
    }
  }

  private notify(): void {
    this.events.onChange?.();
  }
}
