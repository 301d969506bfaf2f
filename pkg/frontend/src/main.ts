// Browser entry point: wires a WebSocket line transport into the session
// and repaints the four views on every state change.

import { renderCdfChart, renderDelayChart, renderUtilChart } from "./charts.js";
import {
  Connection,
  ConnectionHandlers,
  DashboardSession,
  Transport,
} from "./session.js";
import {
  ctiLogView,
  delaySeries,
  latencyCdf,
  statusBanner,
  utilSeries,
} from "./views.js";

// The simulator listens on raw TCP; browsers need a WebSocket bridge in
// front of it (e.g. `websockify 9901 127.0.0.1:9900`). Each WebSocket
// message is one protocol line, verbatim.
class WebSocketTransport implements Transport {
  constructor(private url: string) {}

  open(handlers: ConnectionHandlers): Connection {
    const ws = new WebSocket(this.url);
    let buffer = "";
    ws.onopen = () => handlers.onOpen();
    ws.onclose = () => handlers.onClose();
    ws.onmessage = (ev) => {
      buffer += typeof ev.data === "string" ? ev.data : "";
      let nl;
      while ((nl = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, nl);
        buffer = buffer.slice(nl + 1);
        if (line) handlers.onLine(line);
      }
      if (buffer && !buffer.includes("\n") && buffer.startsWith("{") && buffer.endsWith("}")) {
        handlers.onLine(buffer); // bridge sent a single frame without newline
        buffer = "";
      }
    };
    return {
      send: (line) => ws.send(line + "\n"),
      close: () => ws.close(),
    };
  }
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function repaint(session: DashboardSession): void {
  const banner = statusBanner(session);
  const status = el<HTMLSpanElement>("status");
  status.textContent = banner.text;
  status.className = banner.tone;

  const badge = el<HTMLSpanElement>("mode-badge");
  badge.textContent = session.mode ?? "—";
  badge.className = session.pendingCommands > 0 ? "pending" : "settled";

  renderDelayChart(
    el<HTMLCanvasElement>("delay-chart"),
    delaySeries(session.windows),
    session.markers,
  );
  renderUtilChart(
    el<HTMLCanvasElement>("util-chart"),
    utilSeries(session.windows),
    session.markers,
  );
  const cdf = latencyCdf(session.windows);
  renderCdfChart(el<HTMLCanvasElement>("cdf-chart"), [
    { points: cdf.cti, color: "#2a2" },
    { points: cdf.sr, color: "#d33" },
  ]);

  const log = ctiLogView(session.ctiLog);
  const tbody = el<HTMLTableSectionElement>("cti-log");
  if (log.empty) {
    tbody.innerHTML = `<tr><td colspan="5" class="empty">${log.message}</td></tr>`;
  } else {
    tbody.innerHTML = log.rows
      .map(
        (r) =>
          `<tr><td>${r.seq}</td><td>${r.tcont}</td><td>${r.bytes}</td>` +
          `<td>${(r.arrivalStartNs / 1e6).toFixed(3)}</td>` +
          `<td>${(r.arrivalEndNs / 1e6).toFixed(3)}</td></tr>`,
      )
      .join("");
  }
}

function start(): void {
  const params = new URLSearchParams(location.search);
  const url = params.get("ws") ?? "ws://127.0.0.1:9901";
  const session = new DashboardSession(
    new WebSocketTransport(url),
    { setTimeout: (fn, ms) => window.setTimeout(fn, ms), clearTimeout: (id) => window.clearTimeout(id) },
    {
      onChange: () => repaint(session),
      onError: (message) => {
        const toast = el<HTMLDivElement>("toast");
        toast.textContent = message;
        toast.style.display = "block";
        window.setTimeout(() => (toast.style.display = "none"), 4000);
      },
    },
  );

  el<HTMLButtonElement>("btn-cti").onclick = () =>
    session.send({ cmd: "set_mode", mode: "cti" });
  el<HTMLButtonElement>("btn-sr").onclick = () =>
    session.send({ cmd: "set_mode", mode: "sr" });
  el<HTMLButtonElement>("btn-pause").onclick = () =>
    session.send({ cmd: session.paused ? "resume" : "pause" });
  el<HTMLButtonElement>("btn-reset").onclick = () => session.send({ cmd: "reset" });
  el<HTMLInputElement>("scale").onchange = (ev) => {
    const scale = Number((ev.target as HTMLInputElement).value);
    if (!Number.isNaN(scale)) {
      session.send({ cmd: "set_traffic_scale", ue: "all", scale });
    }
  };

  session.connect();
}

document.addEventListener("DOMContentLoaded", start);
