// Pure render models: each function maps session state to the exact points
// a chart draws. No DOM, no invention — every plotted value comes from a
// received frame, and empty windows become gaps (null), never zeros.

import { CtiFrame, Mode, WindowFrame } from "./protocol.js";
import { DashboardSession, ModeMarker } from "./session.js";

export interface DelayPoint {
  tNs: number;
  meanUs: number | null;
  p50Us: number | null;
  p99Us: number | null;
}

export interface UtilPoint {
  tNs: number;
  util: number;
  wastedB: number;
  grantedB: number;
}

export interface CtiLogRow {
  seq: number;
  reportTimeNs: number;
  tcont: number;
  bytes: number;
  arrivalStartNs: number;
  arrivalEndNs: number;
}

export interface CtiLogView {
  empty: boolean;
  message: string | null;
  rows: CtiLogRow[];
}

export interface CdfPoint {
  delayUs: number;
  fraction: number;
}

export interface CdfView {
  cti: CdfPoint[];
  sr: CdfPoint[];
}

export interface ModeSegment {
  mode: Mode;
  windows: WindowFrame[];
}

export function delaySeries(windows: WindowFrame[]): DelayPoint[] {
  return windows.map((w) => ({
    tNs: w.window_start_ns,
    meanUs: w.samples > 0 ? w.mean_q_us : null,
    p50Us: w.samples > 0 ? w.p50_q_us : null,
    p99Us: w.samples > 0 ? w.p99_q_us : null,
  }));
}

export function utilSeries(windows: WindowFrame[]): UtilPoint[] {
  return windows.map((w) => ({
    tNs: w.window_start_ns,
    util: w.util,
    wastedB: w.wasted_B,
    grantedB: w.granted_B,
  }));
}

export function ctiLogView(log: CtiFrame[], limit = 50): CtiLogView {
  if (log.length === 0) {
    return { empty: true, message: "no CTI traffic", rows: [] };
  }
  const rows: CtiLogRow[] = [];
  // newest first, one row per entry
  for (let i = log.length - 1; i >= 0 && rows.length < limit; i--) {
    const frame = log[i];
    for (const e of frame.entries) {
      rows.push({
        seq: frame.seq,
        reportTimeNs: frame.report_time_ns,
        tcont: e.tcont,
        bytes: e.bytes,
        arrivalStartNs: e.arrival_start_ns,
        arrivalEndNs: e.arrival_end_ns,
      });
      if (rows.length >= limit) break;
    }
  }
  return { empty: false, message: null, rows };
}

/** Splits the window series into contiguous same-mode runs, using the mode
 * recorded in each window frame (markers only annotate; they do not define
 * the segmentation, since the effective instant lies inside some window). */
export function modeSegments(windows: WindowFrame[]): ModeSegment[] {
  const segments: ModeSegment[] = [];
  for (const w of windows) {
    const last = segments[segments.length - 1];
    if (last && last.mode === w.mode) {
      last.windows.push(w);
    } else {
      segments.push({ mode: w.mode, windows: [w] });
    }
  }
  return segments;
}

function segmentCdf(windows: WindowFrame[]): CdfPoint[] {
  // The protocol carries per-window percentiles, not raw samples, so the
  // CDF pools each non-empty window's (p50, p95, p99) marks.
  const values: number[] = [];
  for (const w of windows) {
    if (w.samples === 0) continue;
    for (const v of [w.p50_q_us, w.p95_q_us, w.p99_q_us]) {
      if (v !== null) values.push(v);
    }
  }
  values.sort((a, b) => a - b);
  return values.map((v, i) => ({
    delayUs: v,
    fraction: (i + 1) / values.length,
  }));
}

/** Latency CDF comparing the most recent cooperative segment against the
 * most recent baseline segment of this live session. */
export function latencyCdf(windows: WindowFrame[]): CdfView {
  const segments = modeSegments(windows);
  const latest = (mode: Mode): WindowFrame[] => {
    for (let i = segments.length - 1; i >= 0; i--) {
      if (segments[i].mode === mode) return segments[i].windows;
    }
    return [];
  };
  return { cti: segmentCdf(latest("cti")), sr: segmentCdf(latest("sr")) };
}

export function markersInRange(
  markers: ModeMarker[],
  fromNs: number,
  toNs: number,
): ModeMarker[] {
  return markers.filter((m) => m.atNs >= fromNs && m.atNs <= toNs);
}

export interface StatusBanner {
  text: string;
  tone: "ok" | "warn" | "error";
}

export function statusBanner(session: DashboardSession): StatusBanner {
  switch (session.status) {
    case "connected":
      if (session.finished) return { text: "run finished", tone: "ok" };
      if (session.paused) return { text: "paused", tone: "warn" };
      if (session.wallSlipMs > 1) {
        return {
          text: `connected (behind by ${session.wallSlipMs.toFixed(1)} ms)`,
          tone: "warn",
        };
      }
      return { text: "connected", tone: "ok" };
    case "connecting":
      return { text: "connecting…", tone: "warn" };
    case "disconnected":
      if (session.retryInMs !== null) {
        return {
          text: `disconnected — retrying in ${(session.retryInMs / 1000).toFixed(0)} s`,
          tone: "error",
        };
      }
      return { text: "disconnected", tone: "error" };
  }
}
