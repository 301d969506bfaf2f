// Minimal canvas line charts. Deliberately thin: all decisions about what
// to draw live in views.ts; this file only turns point lists into pixels.

import { DelayPoint, UtilPoint } from "./views.js";
import { ModeMarker } from "./session.js";

interface Range {
  min: number;
  max: number;
}

function rangeOf(values: number[]): Range {
  if (values.length === 0) return { min: 0, max: 1 };
  const min = Math.min(...values);
  const max = Math.max(...values);
  return max > min ? { min, max } : { min, max: min + 1 };
}

function drawSeries(
  ctx: CanvasRenderingContext2D,
  points: Array<{ x: number; y: number | null }>,
  xr: Range,
  yr: Range,
  color: string,
): void {
  const { width, height } = ctx.canvas;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  let pen = false;
  for (const p of points) {
    if (p.y === null) {
      pen = false; // gap: empty window
      continue;
    }
    const x = ((p.x - xr.min) / (xr.max - xr.min)) * width;
    const y = height - ((p.y - yr.min) / (yr.max - yr.min)) * height;
    if (pen) {
      ctx.lineTo(x, y);
    } else {
      ctx.moveTo(x, y);
      pen = true;
    }
  }
  ctx.stroke();
}

function drawMarkers(
  ctx: CanvasRenderingContext2D,
  markers: ModeMarker[],
  xr: Range,
): void {
  const { width, height } = ctx.canvas;
  for (const m of markers) {
    const x = ((m.atNs - xr.min) / (xr.max - xr.min)) * width;
    ctx.strokeStyle = "#888";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#888";
    ctx.fillText(m.mode, x + 3, 10);
  }
}

export function renderDelayChart(
  canvas: HTMLCanvasElement,
  points: DelayPoint[],
  markers: ModeMarker[],
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xr = rangeOf(points.map((p) => p.tNs));
  const ys = points.flatMap((p) =>
    [p.meanUs, p.p50Us, p.p99Us].filter((v): v is number => v !== null),
  );
  const yr = rangeOf(ys);
  drawSeries(ctx, points.map((p) => ({ x: p.tNs, y: p.p99Us })), xr, yr, "#d33");
  drawSeries(ctx, points.map((p) => ({ x: p.tNs, y: p.p50Us })), xr, yr, "#39c");
  drawSeries(ctx, points.map((p) => ({ x: p.tNs, y: p.meanUs })), xr, yr, "#2a2");
  drawMarkers(ctx, markers, xr);
}

export function renderUtilChart(
  canvas: HTMLCanvasElement,
  points: UtilPoint[],
  markers: ModeMarker[],
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xr = rangeOf(points.map((p) => p.tNs));
  drawSeries(
    ctx,
    points.map((p) => ({ x: p.tNs, y: p.util })),
    xr,
    rangeOf(points.map((p) => p.util)),
    "#39c",
  );
  drawSeries(
    ctx,
    points.map((p) => ({ x: p.tNs, y: p.wastedB })),
    xr,
    rangeOf(points.map((p) => p.wastedB)),
    "#d93",
  );
  drawMarkers(ctx, markers, xr);
}

export function renderCdfChart(
  canvas: HTMLCanvasElement,
  series: Array<{ points: Array<{ delayUs: number; fraction: number }>; color: string }>,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const all = series.flatMap((s) => s.points.map((p) => p.delayUs));
  const xr = rangeOf(all);
  const yr = { min: 0, max: 1 };
  for (const s of series) {
    drawSeries(
      ctx,
      s.points.map((p) => ({ x: p.delayUs, y: p.fraction })),
      xr,
      yr,
      s.color,
    );
  }
}
