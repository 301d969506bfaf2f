"""XGS-PON upstream path: ONU TCONT queues, the OLT DBA (cooperative and
status-report baseline), BWMap construction and validation, and burst
execution with byte-granular fragmentation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .simcore import US
from .cti import CtiEntry, CtiTiming, earliest_grant_time
from .ran import FronthaulPacket

ALLOC_GRANULARITY = 4
FRAGMENT_HEADER_BYTES = 8  # XGEM-like encapsulation per fragment


@dataclass
class PonConfig:
    frame_duration: int = 125 * US
    upstream_rate_bps: int = 9_953_280_000
    guard_bytes: int = 64
    burst_overhead_bytes: int = 40  # preamble + delimiter
    sr_poll_interval: int = 500 * US
    olt_processing: int = 35 * US
    queue_max_bytes: int = 10_000_000

    @property
    def capacity_bytes(self) -> int:
        return self.upstream_rate_bps * self.frame_duration // (8 * 1_000_000_000)

    def validate(self) -> list[str]:
        errors = []
        if self.upstream_rate_bps * self.frame_duration % (8 * 1_000_000_000) != 0:
            errors.append("pon: upstream_rate x frame_duration must be a whole byte count")
        if self.guard_bytes < 0 or self.burst_overhead_bytes < 0:
            errors.append("pon: guard_bytes and burst_overhead_bytes must be >= 0")
        if self.sr_poll_interval < self.frame_duration:
            errors.append("pon: sr_poll_interval must be >= frame_duration")
        return errors


def bytes_to_ns(n_bytes: int, rate_bps: int) -> int:
    """Serialization time of n_bytes at the upstream line rate, rounded."""
    return (n_bytes * 8 * 1_000_000_000 + rate_bps // 2) // rate_bps


def ns_to_byte_offset(dt_ns: int, rate_bps: int) -> int:
    """Smallest byte offset whose start time is at or after dt_ns."""
    return -(-dt_ns * rate_bps // (8 * 1_000_000_000))


def propagation_ns(fiber_km: float) -> int:
    return int(fiber_km * 5_000)  # 5 us/km


@dataclass(frozen=True)
class Allocation:
    tcont_id: int
    start_offset: int  # bytes from frame start
    grant_bytes: int


@dataclass(frozen=True)
class BwMap:
    frame_index: int
    allocations: tuple[Allocation, ...]


@dataclass(frozen=True)
class LatencySample:
    packet_id: int
    tcont_id: int
    enqueue_time: int
    grant_start_time: int
    olt_rx_time: int
    bytes: int

    @property
    def queue_delay(self) -> int:
        return self.grant_start_time - self.enqueue_time

    @property
    def total_delay(self) -> int:
        return self.olt_rx_time - self.enqueue_time


class _QueuedPacket:
    __slots__ = ("packet_id", "remaining", "total", "enqueue_time", "first_grant_start")

    def __init__(self, packet_id: int, total: int, enqueue_time: int):
        self.packet_id = packet_id
        self.remaining = total
        self.total = total
        self.enqueue_time = enqueue_time
        self.first_grant_start: int | None = None


class TcontQueue:
    """FIFO of upstream packets at one ONU TCONT."""

    def __init__(self, tcont_id: int, onu_id: int, klass: str = "fronthaul",
                 max_bytes: int = 10_000_000):
        self.tcont_id = tcont_id
        self.onu_id = onu_id
        self.klass = klass
        self.max_bytes = max_bytes
        self.fifo: deque[_QueuedPacket] = deque()
        self.occupancy_bytes = 0
        self.enqueued_bytes = 0
        self.drained_bytes = 0
        self.dropped_packets = 0
        self.dropped_bytes = 0

    def enqueue(self, packet_id: int, n_bytes: int, now: int) -> bool:
        """Returns False (and counts a drop) when the queue cap is exceeded."""
        if n_bytes <= 0:
            raise ValueError("packet bytes must be > 0")
        if self.occupancy_bytes + n_bytes > self.max_bytes:
            self.dropped_packets += 1
            self.dropped_bytes += n_bytes
            return False
        self.fifo.append(_QueuedPacket(packet_id, n_bytes, now))
        self.occupancy_bytes += n_bytes
        self.enqueued_bytes += n_bytes
        return True

    def status_report(self) -> int:
        return self.occupancy_bytes


@dataclass(frozen=True)
class StatusReport:
    tcont_id: int
    occupancy_bytes: int
    generated_at: int


@dataclass
class AllocationResult:
    samples: list[LatencySample]
    report: StatusReport
    granted: int
    used: int
    wasted: int
    burst_end: int


def _round_up4(n: int) -> int:
    return max(ALLOC_GRANULARITY, (n + 3) // 4 * 4)


def validate_bwmap(bwmap: BwMap, cfg: PonConfig) -> list[str]:
    """Returns violation descriptions; an empty list means the map is valid."""
    violations = []
    cap = cfg.capacity_bytes
    total = 0
    prev_end = None
    prev_start = None
    for alloc in bwmap.allocations:
        if prev_start is not None and alloc.start_offset < prev_start:
            violations.append(f"allocations not sorted at offset {alloc.start_offset}")
        if alloc.grant_bytes < ALLOC_GRANULARITY or alloc.grant_bytes % ALLOC_GRANULARITY:
            violations.append(
                f"tcont {alloc.tcont_id}: grant {alloc.grant_bytes} not a positive multiple of 4")
        if alloc.start_offset + alloc.grant_bytes + cfg.guard_bytes > cap:
            violations.append(
                f"tcont {alloc.tcont_id}: allocation ends beyond frame capacity")
        if prev_end is not None and alloc.start_offset < prev_end:
            violations.append(
                f"overlap: allocation at {alloc.start_offset} begins before {prev_end} "
                f"(guard {cfg.guard_bytes})")
        prev_end = alloc.start_offset + alloc.grant_bytes + cfg.guard_bytes
        prev_start = alloc.start_offset
        total += alloc.grant_bytes + cfg.burst_overhead_bytes + cfg.guard_bytes
    if total > cap:
        violations.append(f"total burst load {total} exceeds frame capacity {cap}")
    return violations


@dataclass
class _PendingEntry:
    entry: CtiEntry
    receipt_time: int
    placement_time: int
    order: int


class Dba:
    """OLT bandwidth allocator. One instance serves both modes so that the
    polling schedule and report bookkeeping are identical, which makes the
    zero-information cooperative mode reduce exactly to the baseline."""

    def __init__(self, cfg: PonConfig, tcont_ids: list[int], timing: CtiTiming | None = None):
        self.cfg = cfg
        self.tcont_ids = sorted(tcont_ids)
        self.timing = timing or CtiTiming()
        self.last_report: dict[int, int] = {t: 0 for t in self.tcont_ids}
        self.last_report_time: dict[int, int] = {t: -1 for t in self.tcont_ids}
        # grants issued but not yet reflected in any received report
        self.outstanding: dict[int, list[tuple[int, int]]] = {t: [] for t in self.tcont_ids}
        self.poll_due: dict[int, int] = {t: 0 for t in self.tcont_ids}
        self.pending: deque[_PendingEntry] = deque()
        self._order = 0

    # -- inputs -----------------------------------------------------------

    def on_status_report(self, report: StatusReport) -> None:
        t = report.tcont_id
        if t not in self.last_report or report.generated_at < self.last_report_time[t]:
            return
        self.last_report[t] = report.occupancy_bytes
        self.last_report_time[t] = report.generated_at
        self.outstanding[t] = [
            (start, grant) for start, grant in self.outstanding[t]
            if start > report.generated_at
        ]

    def on_cti_entries(self, entries: tuple[CtiEntry, ...], receipt_time: int) -> None:
        for entry in entries:
            if entry.tcont_id not in self.last_report:
                continue
            # place at or after the window end so the burst is queued by then
            placement = max(earliest_grant_time(receipt_time, self.timing, entry),
                            entry.arrival_end)
            self.pending.append(_PendingEntry(entry, receipt_time, placement, self._order))
            self._order += 1

    # -- per-frame steps ---------------------------------------------------

    def dba_sr_step(self, frame_index: int) -> BwMap:
        """Baseline: grants proportional to last reported occupancy plus polling."""
        allocations: list[Allocation] = []
        self._sr_fill(frame_index, allocations, spans=[])
        return self._finish(frame_index, allocations)

    def dba_cti_step(self, frame_index: int) -> BwMap:
        """Cooperative: pre-place grants for reported bursts, then serve
        leftover capacity with the baseline fill."""
        cfg = self.cfg
        fs = frame_index * cfg.frame_duration
        fe = fs + cfg.frame_duration
        cap = cfg.capacity_bytes

        due: list[_PendingEntry] = []
        rest: deque[_PendingEntry] = deque()
        for p in self.pending:
            (due if p.placement_time < fe else rest).append(p)
        due.sort(key=lambda p: (p.placement_time, p.order))

        allocations: list[Allocation] = []
        spans: list[tuple[int, int]] = []  # occupied [overhead start, guard end)
        cursor = 0
        carried: list[_PendingEntry] = []
        blocked = False
        for p in due:
            if blocked:
                carried.append(p)
                continue
            grant = _round_up4(p.entry.expected_bytes)
            desired = ns_to_byte_offset(max(0, p.placement_time - fs), cfg.upstream_rate_bps)
            start = max(desired, cursor + cfg.burst_overhead_bytes)
            if start + grant + cfg.guard_bytes > cap:
                carried.append(p)
                blocked = True  # preserve service order across frames
                continue
            allocations.append(Allocation(p.entry.tcont_id, start, grant))
            spans.append((start - cfg.burst_overhead_bytes, start + grant + cfg.guard_bytes))
            cursor = start + grant + cfg.guard_bytes
            self.outstanding[p.entry.tcont_id].append((fs + bytes_to_ns(start, cfg.upstream_rate_bps), grant))
        self.pending = deque(carried) + rest

        self._sr_fill(frame_index, allocations, spans)
        return self._finish(frame_index, allocations)

    # -- internals ---------------------------------------------------------

    @staticmethod
    def _first_fit(spans: list[tuple[int, int]], size: int, cap: int) -> int | None:
        """Earliest offset where an occupied span of `size` fits; None if full."""
        pos = 0
        for lo, hi in spans:
            if pos + size <= lo:
                break
            pos = max(pos, hi)
        if pos + size > cap:
            return None
        return pos

    def _sr_fill(self, frame_index: int, allocations: list[Allocation],
                 spans: list[tuple[int, int]]) -> None:
        cfg = self.cfg
        fs = frame_index * cfg.frame_duration
        cap = cfg.capacity_bytes
        used_span = sum(hi - lo for lo, hi in spans)
        granted_tconts = {a.tcont_id for a in allocations}

        demands: dict[int, int] = {}
        for t in self.tcont_ids:
            outstanding = sum(g for _, g in self.outstanding[t])
            d = self.last_report[t] - outstanding
            if d > 0:
                demands[t] = _round_up4(d)
        polls = [t for t in self.tcont_ids
                 if self.poll_due[t] <= fs and t not in demands and t not in granted_tconts]

        per_alloc = cfg.burst_overhead_bytes + cfg.guard_bytes
        avail = (cap - used_span
                 - (len(demands) + len(polls)) * per_alloc
                 - ALLOC_GRANULARITY * len(polls))
        total_demand = sum(demands.values())
        grants: dict[int, int] = {}
        if demands:
            if total_demand <= avail:
                grants = dict(demands)
            elif avail >= ALLOC_GRANULARITY * len(demands):
                # proportional fill in 4-byte units, remainder to lower tcont_id
                units = avail // ALLOC_GRANULARITY
                base = {t: max(1, units * demands[t] // total_demand) for t in demands}
                spare = units - sum(base.values())
                for t in sorted(demands):
                    if spare <= 0:
                        break
                    take = min(spare, demands[t] // ALLOC_GRANULARITY - base[t])
                    if take > 0:
                        base[t] += take
                        spare -= take
                for t in sorted(demands, key=lambda t: -base[t]):
                    if spare >= 0:
                        break
                    give_back = min(-spare, base[t] - 1)
                    base[t] -= give_back
                    spare += give_back
                grants = {t: base[t] * ALLOC_GRANULARITY for t in demands}
            # else: no room for data grants this frame

        spans = sorted(spans)
        for t in self.tcont_ids:
            if t in grants:
                grant = min(grants[t], demands[t])
            elif t in polls:
                grant = ALLOC_GRANULARITY
            else:
                continue
            size = cfg.burst_overhead_bytes + grant + cfg.guard_bytes
            pos = self._first_fit(spans, size, cap)
            if pos is None:
                continue
            start = pos + cfg.burst_overhead_bytes
            allocations.append(Allocation(t, start, grant))
            spans.append((pos, pos + size))
            spans.sort()
            if t in grants:
                self.outstanding[t].append(
                    (fs + bytes_to_ns(start, cfg.upstream_rate_bps), grant))

    def _finish(self, frame_index: int, allocations: list[Allocation]) -> BwMap:
        fs = frame_index * self.cfg.frame_duration
        for a in allocations:
            self.poll_due[a.tcont_id] = fs + self.cfg.sr_poll_interval
        allocations.sort(key=lambda a: a.start_offset)
        return BwMap(frame_index=frame_index, allocations=tuple(allocations))


class PonFabric:
    """ONU-side queues plus the physical upstream: executes BWMap allocations,
    tracking fragmentation, waste, and per-packet latency."""

    def __init__(self, cfg: PonConfig, queues: dict[int, TcontQueue],
                 onu_fiber_km: dict[int, float]):
        self.cfg = cfg
        self.queues = queues
        self.prop_ns = {onu: propagation_ns(km) for onu, km in onu_fiber_km.items()}
        self.unknown_tcont_violations = 0
        self.total_granted = 0
        self.total_used = 0
        self.total_wasted = 0

    def drain_allocation(self, alloc: Allocation, start_time: int) -> AllocationResult | None:
        queue = self.queues.get(alloc.tcont_id)
        if queue is None:
            self.unknown_tcont_violations += 1
            return None
        rate = self.cfg.upstream_rate_bps
        budget = alloc.grant_bytes
        wire_bytes = 0
        used = 0
        samples: list[LatencySample] = []
        while budget > 0 and queue.fifo:
            head = queue.fifo[0]
            if head.first_grant_start is None:
                head.first_grant_start = start_time
            sent = min(head.remaining, budget)
            wire_bytes += FRAGMENT_HEADER_BYTES + sent
            budget -= sent
            head.remaining -= sent
            queue.occupancy_bytes -= sent
            queue.drained_bytes += sent
            used += sent
            if head.remaining == 0:
                queue.fifo.popleft()
                rx = start_time + bytes_to_ns(wire_bytes, rate) + self.prop_ns[queue.onu_id]
                samples.append(LatencySample(
                    packet_id=head.packet_id,
                    tcont_id=alloc.tcont_id,
                    enqueue_time=head.enqueue_time,
                    grant_start_time=head.first_grant_start,
                    olt_rx_time=rx,
                    bytes=head.total,
                ))
        burst_end = start_time + bytes_to_ns(max(wire_bytes, ALLOC_GRANULARITY), rate)
        report = StatusReport(tcont_id=alloc.tcont_id,
                              occupancy_bytes=queue.occupancy_bytes,
                              generated_at=burst_end)
        self.total_granted += alloc.grant_bytes
        self.total_used += used
        self.total_wasted += budget
        return AllocationResult(samples=samples, report=report,
                                granted=alloc.grant_bytes, used=used, wasted=budget,
                                burst_end=burst_end)

    def execute_frame(self, bwmap: BwMap) -> list[LatencySample]:
        """Synchronous frame execution against current queue contents. The
        event-driven runner drains each allocation at its own start instant;
        this form serves unit tests where all arrivals are already queued."""
        fs = bwmap.frame_index * self.cfg.frame_duration
        samples: list[LatencySample] = []
        for alloc in bwmap.allocations:
            start_time = fs + bytes_to_ns(alloc.start_offset, self.cfg.upstream_rate_bps)
            result = self.drain_allocation(alloc, start_time)
            if result is not None:
                samples.extend(result.samples)
        return samples
