"""Scenario execution: wires UEs, the DU scheduler, the CTI link, and the
PON fabric onto the event loop; produces RunReports and side-by-side
cooperative-vs-baseline comparisons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from . import cti as cti_mod
from . import ran
from .pon import (Allocation, BwMap, Dba, PonFabric, TcontQueue, bytes_to_ns,
                  validate_bwmap)
from .scenario import ScenarioConfig
from .simcore import EventLoop, RngStream
from .telemetry import Collector, RunReport, export_report_json


class RuntimeViolation(Exception):
    """A BwMap failed validation during a strict run."""


@dataclass
class _Command:
    apply: Callable[["Simulation"], None]
    done: Callable[[int], None] | None = None  # called with effective_at_ns


class Simulation:
    """One scenario run. Deterministic for a fixed (config, mode, seed);
    external steering enters only through the mailbox, drained at frame
    boundaries."""

    def __init__(self, cfg: ScenarioConfig, mode: str | None = None, *,
                 keep_raw: bool = False, capture_trace: bool = False,
                 strict: bool = True):
        self.cfg = cfg
        self.mode = mode or cfg.mode
        self.strict = strict
        self.keep_raw = keep_raw
        self.background_samples: list = []
        self.loop = EventLoop()
        self.mailbox: list[_Command] = []
        self.trace: list[str] | None = [] if capture_trace else None
        self.violations: list[str] = []

        seed = cfg.seed
        self.ues = [
            ran.UeState(u.ue_id, u.profile, u.mcs, RngStream(seed, f"ue-{u.ue_id}"))
            for u in cfg.ues
        ]
        self.background = [
            (o, ran.UeState(-1 - o.onu_id, o.background, 0,
                            RngStream(seed, f"bg-{o.onu_id}")))
            for o in cfg.onus if o.background is not None
        ]

        queues: dict[int, TcontQueue] = {}
        for u in cfg.ues:
            if u.tcont_id not in queues:
                queues[u.tcont_id] = TcontQueue(u.tcont_id, u.onu_id, "fronthaul",
                                                cfg.pon.queue_max_bytes)
        for o, _ in self.background:
            queues[o.background_tcont] = TcontQueue(o.background_tcont, o.onu_id,
                                                    "background", cfg.pon.queue_max_bytes)
        self.queues = queues
        self.fabric = PonFabric(cfg.pon, queues,
                                {o.onu_id: o.fiber_km for o in cfg.onus})
        self.dba = Dba(cfg.pon, list(queues), cfg.cti_timing)
        self.sender = cti_mod.CtiSender(timing=cfg.cti_timing, heartbeat=cfg.cti_heartbeat)
        self.drop_rng = RngStream(seed, "cti-drop")
        self.cti_dropped = 0
        self.cti_rx_seqs: list[int] = []
        self.cti_rx_log: list[cti_mod.CtiReport] = []
        self.on_cti_receipt: Callable[[cti_mod.CtiReport], None] | None = None

        self.collector = Collector(cfg.telemetry_window, cfg.pon.capacity_bytes,
                                   cfg.pon.frame_duration, self.mode,
                                   seed=seed, keep_raw=keep_raw)
        self.fh_bytes_scheduled = 0   # fronthaul bytes put in flight toward ONUs
        self.fronthaul_sample_count = 0
        self._pending_tx: dict[int, list[ran.UplinkGrant]] = {}
        self._next_map: BwMap | None = None
        self._packet_seq = 0
        self._n_slots = -(-cfg.duration // cfg.slot.slot_duration)

        self.loop.register("slot", self._on_slot)
        self.loop.register("frame", self._on_frame)
        self.loop.register("arrival", self._on_arrival)
        self.loop.register("alloc", self._on_alloc)
        self.loop.register("cti-rx", self._on_cti_rx)
        self.loop.register("sr-rx", self._on_sr_rx)
        self.loop.schedule(0, "slot", 0)
        self.loop.schedule(0, "frame", 0)

    # -- control ------------------------------------------------------------

    def post_command(self, apply: Callable[["Simulation"], None],
                     done: Callable[[int], None] | None = None) -> None:
        self.mailbox.append(_Command(apply, done))

    def set_mode(self, mode: str) -> None:
        if mode not in ("cti", "sr"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode != self.mode and mode == "sr":
            self.dba.pending.clear()  # unreported bytes fall back to status reports
        self.mode = mode
        self.collector.mode = mode

    def set_traffic_scale(self, ue_id: int | str, scale: float) -> None:
        if scale < 0:
            raise ValueError("scale must be >= 0")
        targets = [u for u in self.ues if ue_id == "all" or u.ue_id == ue_id]
        if ue_id != "all" and not targets:
            raise ValueError(f"unknown ue {ue_id}")
        for u in targets:
            u.profile.scale = scale
        if ue_id == "all":
            for _, bg in self.background:
                bg.profile.scale = scale

    # -- event handlers -------------------------------------------------------

    def _on_slot(self, event) -> None:
        s = event.payload
        now = self.loop.now()
        cfg = self.cfg

        for grant in self._pending_tx.pop(s, ()):
            ue = next(u for u in self.ues if u.ue_id == grant.ue_id)
            ran.apply_tx_debit(ue, grant)

        for ue in self.ues:
            ran.gen_traffic(ue, s, cfg.slot.slot_duration)
        self._gen_background(s)

        grants = ran.schedule_slot(s, self.ues, cfg.slot)
        if grants:
            self._pending_tx.setdefault(s + cfg.slot.k2, []).extend(grants)
            for grant in grants:
                n_bytes = ran.fronthaul_bytes_for_grant(
                    grant, cfg.slot.iq_bitwidth, cfg.slot.per_symbol_overhead_bytes)
                if n_bytes <= 0:
                    continue
                self._packet_seq += 1
                self.fh_bytes_scheduled += n_bytes
                self.loop.schedule(ran.arrival_time(grant, cfg.slot), "arrival",
                                   (cfg.ue_to_tcont[grant.ue_id], n_bytes, self._packet_seq))

        if self.mode == "cti":
            report = self.sender.next_report(grants, s, cfg.slot, cfg.ue_to_tcont)
            if report is not None:
                wire = cti_mod.encode(report)
                if self.cfg.cti_drop_rate > 0 and self.drop_rng.random() < self.cfg.cti_drop_rate:
                    self.cti_dropped += 1
                else:
                    self.loop.schedule(now + cfg.cti_timing.transport_delay, "cti-rx", wire)

        if s + 1 <= self._n_slots:
            self.loop.schedule((s + 1) * cfg.slot.slot_duration, "slot", s + 1)

    def _gen_background(self, slot_index: int) -> None:
        now = self.loop.now()
        for onu, bg in self.background:
            ran.gen_traffic(bg, slot_index, self.cfg.slot.slot_duration)
            chunk = max(1, onu.background_packet_bytes)
            while bg.buffer_bytes >= chunk:  # whole packets only
                bg.buffer_bytes -= chunk
                self._packet_seq += 1
                self._enqueue(onu.background_tcont, chunk, self._packet_seq, now)

    def _on_arrival(self, event) -> None:
        tcont_id, n_bytes, packet_id = event.payload
        self._enqueue(tcont_id, n_bytes, packet_id, self.loop.now())

    def _enqueue(self, tcont_id: int, n_bytes: int, packet_id: int, now: int) -> None:
        if not self.queues[tcont_id].enqueue(packet_id, n_bytes, now):
            self.collector.record_drop(now)

    def _on_cti_rx(self, event) -> None:
        report = cti_mod.decode(event.payload)
        self.cti_rx_seqs.append(report.seq)
        self.cti_rx_log.append(report)
        self.collector.record_cti(self.loop.now())
        self.dba.on_cti_entries(report.entries, self.loop.now())
        if self.on_cti_receipt is not None:
            self.on_cti_receipt(report)

    def _on_sr_rx(self, event) -> None:
        self.dba.on_status_report(event.payload)

    def _on_frame(self, event) -> None:
        k = event.payload
        cfg = self.cfg
        fs = k * cfg.pon.frame_duration

        if self.mailbox:
            commands, self.mailbox = self.mailbox, []
            for command in commands:
                command.apply(self)
                if command.done is not None:
                    command.done(fs)

        if self._next_map is not None and self._next_map.frame_index == k:
            self._execute_map(self._next_map, fs)
        # prepare the next frame's map; delivery lag is one full frame
        next_index = k + 1
        if self.mode == "cti":
            self._next_map = self.dba.dba_cti_step(next_index)
        else:
            self._next_map = self.dba.dba_sr_step(next_index)

        if (k + 1) * cfg.pon.frame_duration <= cfg.duration:
            self.loop.schedule((k + 1) * cfg.pon.frame_duration, "frame", k + 1)

    def _execute_map(self, bwmap: BwMap, fs: int) -> None:
        problems = validate_bwmap(bwmap, self.cfg.pon)
        if problems:
            self.violations.extend(f"frame {bwmap.frame_index}: {p}" for p in problems)
            if self.strict:
                raise RuntimeViolation(self.violations[-1])
        for alloc in bwmap.allocations:
            if self.trace is not None:
                self.trace.append(f"{bwmap.frame_index} {alloc.tcont_id} "
                                  f"{alloc.start_offset} {alloc.grant_bytes}")
            start = fs + bytes_to_ns(alloc.start_offset, self.cfg.pon.upstream_rate_bps)
            self.loop.schedule(start, "alloc", alloc)

    def _on_alloc(self, event) -> None:
        alloc: Allocation = event.payload
        result = self.fabric.drain_allocation(alloc, self.loop.now())
        if result is None:
            return
        # latency metrics cover the fronthaul path, the demo's headline;
        # background packets still count toward grant/utilization stats
        fronthaul = self.queues[alloc.tcont_id].klass == "fronthaul"
        for sample in result.samples:
            if fronthaul:
                self.fronthaul_sample_count += 1
                self.collector.record(sample)
            elif self.keep_raw:
                self.background_samples.append(sample)
        self.collector.record_grant(self.loop.now(), result.granted,
                                    result.used, result.wasted)
        queue = self.queues[alloc.tcont_id]
        rx_at = result.burst_end + self.fabric.prop_ns[queue.onu_id]
        self.loop.schedule(rx_at, "sr-rx", result.report)

    # -- driving ---------------------------------------------------------------

    def step_until(self, t_ns: int) -> None:
        self.loop.run_until(min(t_ns, self.cfg.duration))

    def finished(self) -> bool:
        return self.loop.now() >= self.cfg.duration

    def run(self) -> RunReport:
        self.loop.run_until(self.cfg.duration)
        return self.report()

    def report(self) -> RunReport:
        return self.collector.finalize(self.cfg.scenario_id, self.cfg.scenario_hash(),
                                       self.cfg.seed, self.cfg.duration)


def run_scenario(cfg: ScenarioConfig, mode: str | None = None, *,
                 keep_raw: bool = False, capture_trace: bool = False,
                 strict: bool = True) -> RunReport:
    return Simulation(cfg, mode, keep_raw=keep_raw, capture_trace=capture_trace,
                      strict=strict).run()


@dataclass(frozen=True)
class ComparisonReport:
    cti: RunReport
    sr: RunReport

    @property
    def mean_q_ratio(self) -> float | None:
        if self.cti.mean_q_us and self.sr.mean_q_us:
            return self.sr.mean_q_us / self.cti.mean_q_us
        return None

    @property
    def p99_q_ratio(self) -> float | None:
        if self.cti.p99_q_us and self.sr.p99_q_us:
            return self.sr.p99_q_us / self.cti.p99_q_us
        return None

    def to_json(self) -> str:
        def delta(a, b):
            if a is None or b is None:
                return None
            return round(b - a, 3)

        doc = {
            "scenario_hash_cti": self.cti.scenario_hash,
            "scenario_hash_sr": self.sr.scenario_hash,
            "mean_q_us": {"cti": self.cti.mean_q_us, "sr": self.sr.mean_q_us,
                          "delta": delta(self.cti.mean_q_us, self.sr.mean_q_us),
                          "ratio_sr_over_cti": (round(self.mean_q_ratio, 3)
                                                if self.mean_q_ratio else None)},
            "p99_q_us": {"cti": self.cti.p99_q_us, "sr": self.sr.p99_q_us,
                         "delta": delta(self.cti.p99_q_us, self.sr.p99_q_us),
                         "ratio_sr_over_cti": (round(self.p99_q_ratio, 3)
                                               if self.p99_q_ratio else None)},
            "util": {"cti": self.cti.util, "sr": self.sr.util},
            "wasted_B": {"cti": self.cti.wasted_B, "sr": self.sr.wasted_B},
            "cti_report": json.loads(export_report_json(self.cti)),
            "sr_report": json.loads(export_report_json(self.sr)),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def compare(cfg: ScenarioConfig, **kwargs) -> ComparisonReport:
    """Run both DBA modes on the same seed and scenario."""
    return ComparisonReport(cti=run_scenario(cfg, "cti", **kwargs),
                            sr=run_scenario(cfg, "sr", **kwargs))
