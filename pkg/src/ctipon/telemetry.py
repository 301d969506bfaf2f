"""Metric collection and export: windowed latency/utilization aggregates,
a log-spaced latency histogram, and deterministic CSV / JSON-lines output.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

from .simcore import MS, US, RngStream
from .pon import LatencySample

CSV_HEADER = ("window_start_ns,mode,samples,mean_q_us,p50_q_us,p95_q_us,p99_q_us,"
              "mean_t_us,util,granted_B,used_B,wasted_B,cti_msgs,drops")
WINDOW_KEYS = CSV_HEADER.split(",")

RESERVOIR_CAP = 65_536
HIST_MIN_NS = 1_000            # 1 us
HIST_MAX_NS = 100_000_000      # 100 ms
HIST_BINS = 60


def histogram_edges() -> list[float]:
    span = math.log(HIST_MAX_NS / HIST_MIN_NS)
    return [HIST_MIN_NS * math.exp(span * i / HIST_BINS) for i in range(HIST_BINS + 1)]


_EDGES = histogram_edges()


def _hist_bin(value_ns: int) -> int:
    if value_ns < HIST_MIN_NS:
        return 0
    if value_ns >= HIST_MAX_NS:
        return HIST_BINS - 1
    b = int(math.log(value_ns / HIST_MIN_NS) / math.log(HIST_MAX_NS / HIST_MIN_NS) * HIST_BINS)
    return min(max(b, 0), HIST_BINS - 1)


def nearest_rank(sorted_values: list[int], pct: float) -> int:
    """Nearest-rank percentile over a non-empty sorted list."""
    n = len(sorted_values)
    idx = max(0, math.ceil(pct / 100.0 * n) - 1)
    return sorted_values[idx]


class _Window:
    __slots__ = ("start_ns", "count", "q_sum", "t_sum", "q_min", "q_max",
                 "reservoir", "seen", "granted", "used", "wasted",
                 "cti_msgs", "drops")

    def __init__(self, start_ns: int):
        self.start_ns = start_ns
        self.count = 0
        self.q_sum = 0
        self.t_sum = 0
        self.q_min: int | None = None
        self.q_max: int | None = None
        self.reservoir: list[int] = []  # queue delays, ns
        self.seen = 0
        self.granted = 0
        self.used = 0
        self.wasted = 0
        self.cti_msgs = 0
        self.drops = 0


@dataclass(frozen=True)
class MetricWindowView:
    """Immutable per-window aggregate, safe to hand across threads."""
    window_start_ns: int
    mode: str
    samples: int
    mean_q_us: float | None
    p50_q_us: float | None
    p95_q_us: float | None
    p99_q_us: float | None
    mean_t_us: float | None
    util: float
    granted_B: int
    used_B: int
    wasted_B: int
    cti_msgs: int
    drops: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in WINDOW_KEYS}


@dataclass(frozen=True)
class RunReport:
    scenario_id: str
    scenario_hash: str
    mode: str
    seed: int
    duration_ns: int
    samples: int
    mean_q_us: float | None
    p50_q_us: float | None
    p95_q_us: float | None
    p99_q_us: float | None
    max_q_us: float | None
    mean_t_us: float | None
    min_t_us: float | None
    util: float
    granted_B: int
    used_B: int
    wasted_B: int
    cti_msgs: int
    drops: int
    windows: tuple[MetricWindowView, ...]
    histogram_counts: tuple[int, ...]


class Collector:
    """Routes samples and grant/CTI/drop events into fixed windows plus a
    whole-run histogram. Per-window percentile state is a bounded reservoir
    (exact below the cap, uniform sampling beyond)."""

    def __init__(self, window_duration: int, frame_capacity_bytes: int,
                 frame_duration: int, mode: str, seed: int = 0, keep_raw: bool = False):
        self.window_duration = window_duration
        self.frame_capacity_bytes = frame_capacity_bytes
        self.frame_duration = frame_duration
        self.mode = mode
        self.keep_raw = keep_raw
        self.raw_samples: list[LatencySample] = []
        self._rng = RngStream(seed, "telemetry-reservoir")
        self._windows: dict[int, _Window] = {}
        self._hist = [0] * HIST_BINS
        self.total_count = 0
        self._q_sum = 0
        self._t_sum = 0
        self._q_max: int | None = None
        self._t_min: int | None = None

    def _window(self, t_ns: int) -> _Window:
        idx = t_ns // self.window_duration
        w = self._windows.get(idx)
        if w is None:
            w = _Window(idx * self.window_duration)
            self._windows[idx] = w
        return w

    def record(self, sample: LatencySample) -> None:
        w = self._window(sample.olt_rx_time)
        q, t = sample.queue_delay, sample.total_delay
        w.count += 1
        w.q_sum += q
        w.t_sum += t
        w.q_min = q if w.q_min is None else min(w.q_min, q)
        w.q_max = q if w.q_max is None else max(w.q_max, q)
        if len(w.reservoir) < RESERVOIR_CAP:
            w.reservoir.append(q)
        else:
            j = self._rng.randrange(w.seen + 1)
            if j < RESERVOIR_CAP:
                w.reservoir[j] = q
        w.seen += 1
        self._hist[_hist_bin(q)] += 1
        self.total_count += 1
        self._q_sum += q
        self._t_sum += t
        self._q_max = q if self._q_max is None else max(self._q_max, q)
        self._t_min = t if self._t_min is None else min(self._t_min, t)
        if self.keep_raw:
            self.raw_samples.append(sample)

    def record_grant(self, t_ns: int, granted: int, used: int, wasted: int) -> None:
        w = self._window(t_ns)
        w.granted += granted
        w.used += used
        w.wasted += wasted

    def record_cti(self, t_ns: int) -> None:
        self._window(t_ns).cti_msgs += 1

    def record_drop(self, t_ns: int) -> None:
        self._window(t_ns).drops += 1

    def _view(self, w: _Window) -> MetricWindowView:
        frames = self.window_duration / self.frame_duration
        util = w.used / (frames * self.frame_capacity_bytes)
        if w.count:
            res = sorted(w.reservoir)
            mean_q = round(w.q_sum / w.count / 1e3, 3)
            p50 = round(nearest_rank(res, 50) / 1e3, 3)
            p95 = round(nearest_rank(res, 95) / 1e3, 3)
            p99 = round(nearest_rank(res, 99) / 1e3, 3)
            mean_t = round(w.t_sum / w.count / 1e3, 3)
        else:
            mean_q = p50 = p95 = p99 = mean_t = None
        return MetricWindowView(
            window_start_ns=w.start_ns, mode=self.mode, samples=w.count,
            mean_q_us=mean_q, p50_q_us=p50, p95_q_us=p95, p99_q_us=p99,
            mean_t_us=mean_t, util=round(util, 9),
            granted_B=w.granted, used_B=w.used, wasted_B=w.wasted,
            cti_msgs=w.cti_msgs, drops=w.drops,
        )

    def snapshot(self, now_ns: int) -> MetricWindowView:
        return self._view(self._window(now_ns))

    def _hist_percentile(self, pct: float) -> float | None:
        if self.total_count == 0:
            return None
        rank = max(1, math.ceil(pct / 100.0 * self.total_count))
        cum = 0
        for b, c in enumerate(self._hist):
            cum += c
            if cum >= rank:
                return round(_EDGES[b + 1] / 1e3, 3)
        return round(_EDGES[-1] / 1e3, 3)

    def finalize(self, scenario_id: str, scenario_hash: str, seed: int,
                 duration_ns: int) -> RunReport:
        n_windows = -(-duration_ns // self.window_duration) if duration_ns else 0
        views = []
        for idx in range(n_windows):
            w = self._windows.get(idx) or _Window(idx * self.window_duration)
            views.append(self._view(w))
        granted = sum(v.granted_B for v in views)
        used = sum(v.used_B for v in views)
        wasted = sum(v.wasted_B for v in views)
        frames = duration_ns / self.frame_duration if duration_ns else 1
        n = self.total_count
        return RunReport(
            scenario_id=scenario_id, scenario_hash=scenario_hash, mode=self.mode,
            seed=seed, duration_ns=duration_ns, samples=n,
            mean_q_us=round(self._q_sum / n / 1e3, 3) if n else None,
            p50_q_us=self._hist_percentile(50),
            p95_q_us=self._hist_percentile(95),
            p99_q_us=self._hist_percentile(99),
            max_q_us=round(self._q_max / 1e3, 3) if n else None,
            mean_t_us=round(self._t_sum / n / 1e3, 3) if n else None,
            min_t_us=round(self._t_min / 1e3, 3) if n else None,
            util=round(used / (frames * self.frame_capacity_bytes), 9),
            granted_B=granted, used_B=used, wasted_B=wasted,
            cti_msgs=sum(v.cti_msgs for v in views),
            drops=sum(v.drops for v in views),
            windows=tuple(views),
            histogram_counts=tuple(self._hist),
        )


def _cell(value) -> str:
    return "" if value is None else str(value)


def export_csv(report: RunReport) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for w in report.windows:
        out.write(",".join(_cell(getattr(w, k)) for k in WINDOW_KEYS) + "\n")
    return out.getvalue()


def export_jsonl(report: RunReport) -> str:
    lines = [json.dumps(w.as_dict(), sort_keys=True, separators=(",", ":"))
             for w in report.windows]
    return "\n".join(lines) + ("\n" if lines else "")


def export_report_json(report: RunReport) -> str:
    doc = {
        "scenario_id": report.scenario_id,
        "scenario_hash": report.scenario_hash,
        "mode": report.mode,
        "seed": report.seed,
        "duration_ns": report.duration_ns,
        "samples": report.samples,
        "mean_q_us": report.mean_q_us,
        "p50_q_us": report.p50_q_us,
        "p95_q_us": report.p95_q_us,
        "p99_q_us": report.p99_q_us,
        "max_q_us": report.max_q_us,
        "mean_t_us": report.mean_t_us,
        "min_t_us": report.min_t_us,
        "util": report.util,
        "granted_B": report.granted_B,
        "used_B": report.used_B,
        "wasted_B": report.wasted_B,
        "cti_msgs": report.cti_msgs,
        "drops": report.drops,
        "histogram_edges_ns": [round(e, 3) for e in _EDGES],
        "histogram_counts": list(report.histogram_counts),
        "windows": [w.as_dict() for w in report.windows],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def parse_csv(text: str) -> list[dict]:
    """Independent reader used by round-trip tests."""
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        row = {}
        for key, cell in zip(header, ln.split(",")):
            if cell == "":
                row[key] = None
            elif key in ("mode",):
                row[key] = cell
            elif "." in cell or "e" in cell or "E" in cell:
                row[key] = float(cell)
            else:
                row[key] = int(cell)
        rows.append(row)
    return rows
