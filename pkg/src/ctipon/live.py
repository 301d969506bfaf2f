"""Live mode: wall-clock-paced simulation steering over a single TCP port
carrying line-delimited JSON. The same endpoint accepts control commands
and streams telemetry windows plus a rolling CTI message log.

Pacing is best effort: simulated time never skips; when the host falls
behind, the slip is reported in the telemetry frames.
"""

from __future__ import annotations

import asyncio
import json
import time
from typing import Callable

from .runner import Simulation
from .scenario import ScenarioConfig
from .simcore import MS

TELEMETRY_PERIOD_S = 0.1


class LiveSession:
    """Transport-independent live core: owns the simulation, the command
    mailbox semantics, and the generation counter bumped on reset."""

    def __init__(self, cfg: ScenarioConfig, pace: float | None = None):
        self.cfg = cfg
        self.pace = cfg.live_pace if pace is None else pace
        self.generation = 0
        self.paused = False
        self.cti_frames: list[dict] = []
        self._new_sim()

    def _new_sim(self) -> None:
        self.sim = Simulation(self.cfg)
        self.sim.on_cti_receipt = self._on_cti

    def _on_cti(self, report) -> None:
        self.cti_frames.append({
            "type": "cti",
            "gen": self.generation,
            "seq": report.seq,
            "report_time_ns": report.report_time,
            "entries": [
                {"tcont": e.tcont_id, "bytes": e.expected_bytes,
                 "arrival_start_ns": e.arrival_start, "arrival_end_ns": e.arrival_end}
                for e in report.entries
            ],
        })

    def drain_cti_frames(self) -> list[dict]:
        frames, self.cti_frames = self.cti_frames, []
        return frames

    def window_frame(self, wall_slip_ms: float = 0.0) -> dict:
        view = self.sim.collector.snapshot(self.sim.loop.now())
        frame = {"type": "window", "gen": self.generation,
                 "sim_time_ns": self.sim.loop.now(),
                 "paused": self.paused,
                 "wall_slip_ms": round(wall_slip_ms, 3)}
        frame.update(view.as_dict())
        return frame

    def step_to(self, sim_target_ns: int) -> None:
        if not self.paused and not self.sim.finished():
            self.sim.step_until(sim_target_ns)

    def handle_command(self, msg: dict, reply: Callable[[dict], None]) -> None:
        """Validates and queues a command; `reply` fires once it took effect
        at a frame boundary (or immediately on validation failure)."""
        try:
            cmd = msg.get("cmd")
            if cmd == "set_mode":
                mode = msg.get("mode")
                if mode not in ("cti", "sr"):
                    raise ValueError(f"unknown mode {mode!r}")
                self.sim.post_command(lambda sim: sim.set_mode(mode),
                                      lambda t: reply({"ok": True, "effective_at_ns": t,
                                                       "gen": self.generation}))
            elif cmd == "set_traffic_scale":
                ue = msg.get("ue", "all")
                scale = float(msg["scale"])
                if scale < 0:
                    raise ValueError("scale must be >= 0")
                if ue != "all" and not any(u.ue_id == ue for u in self.sim.ues):
                    raise ValueError(f"unknown ue {ue}")
                self.sim.post_command(lambda sim: sim.set_traffic_scale(ue, scale),
                                      lambda t: reply({"ok": True, "effective_at_ns": t,
                                                       "gen": self.generation}))
            elif cmd == "pause":
                def do_pause(sim, _t=None):
                    self.paused = True
                self.sim.post_command(lambda sim: do_pause(sim),
                                      lambda t: reply({"ok": True, "effective_at_ns": t,
                                                       "gen": self.generation}))
            elif cmd == "resume":
                self.paused = False
                reply({"ok": True, "effective_at_ns": self.sim.loop.now(),
                       "gen": self.generation})
            elif cmd == "reset":
                self.generation += 1
                self.paused = False
                self.cti_frames.clear()
                self._new_sim()
                reply({"ok": True, "effective_at_ns": 0, "gen": self.generation})
            else:
                raise ValueError(f"unknown command {cmd!r}")
        except (KeyError, TypeError, ValueError) as exc:
            reply({"ok": False, "error": str(exc)})

    def flush_commands(self) -> None:
        """Advance to the next frame boundary so queued commands take effect.
        Used by scripted drivers; the paced server reaches boundaries anyway."""
        if self.sim.mailbox and not self.sim.finished():
            frame = self.cfg.pon.frame_duration
            boundary = (self.sim.loop.now() // frame + 1) * frame
            self.sim.step_until(boundary)

    def run_to_end(self):
        """Unpaced batch-equivalent drive; returns the RunReport."""
        while not self.sim.finished():
            self.sim.step_until(self.sim.loop.now() + 10 * MS)
        return self.sim.report()


async def serve(cfg: ScenarioConfig, port: int | None = None,
                pace: float | None = None, host: str = "127.0.0.1",
                ready: asyncio.Event | None = None) -> None:
    session = LiveSession(cfg, pace)
    writers: set[asyncio.StreamWriter] = set()
    lock = asyncio.Lock()

    def send(writer: asyncio.StreamWriter, obj: dict) -> None:
        try:
            writer.write(json.dumps(obj, sort_keys=True).encode() + b"\n")
        except ConnectionError:
            writers.discard(writer)

    def broadcast(obj: dict) -> None:
        for writer in list(writers):
            send(writer, obj)

    async def client(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        writers.add(writer)
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError as exc:
                    send(writer, {"ok": False, "error": f"bad json: {exc}"})
                    continue
                async with lock:
                    session.handle_command(msg, lambda obj: send(writer, obj))
        finally:
            writers.discard(writer)
            writer.close()

    async def pacer() -> None:
        wall_start = time.monotonic()
        sim_offset = session.sim.loop.now()
        last_telemetry = 0.0
        slip_ms = 0.0
        while True:
            await asyncio.sleep(0.02)
            async with lock:
                if session.pace > 0:
                    elapsed = time.monotonic() - wall_start
                    target = sim_offset + int(elapsed * session.pace * 1e9)
                else:
                    target = session.sim.loop.now() + 10 * MS
                before = session.sim.loop.now()
                if session.paused:
                    session.flush_commands()
                    wall_start = time.monotonic()
                    sim_offset = session.sim.loop.now()
                else:
                    session.step_to(target)
                    slip_ms = max(0.0, (target - session.sim.loop.now()) / 1e6)
                for frame in session.drain_cti_frames():
                    broadcast(frame)
                now_wall = time.monotonic()
                if now_wall - last_telemetry >= TELEMETRY_PERIOD_S:
                    last_telemetry = now_wall
                    broadcast(session.window_frame(
                        0.0 if session.paused else slip_ms))
                if before != session.sim.loop.now() and session.sim.finished():
                    broadcast({"type": "finished", "gen": session.generation,
                               "sim_time_ns": session.sim.loop.now()})

    server = await asyncio.start_server(client, host, port if port is not None else cfg.live_port)
    if ready is not None:
        ready.set()
    pacer_task = asyncio.create_task(pacer())
    try:
        async with server:
            await server.serve_forever()
    finally:
        pacer_task.cancel()
