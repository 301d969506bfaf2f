"""Deterministic discrete-event engine: virtual clock, ordered event queue, seeded RNG streams.

All simulation time is integer nanoseconds, so standards-derived durations
(125 us PON frame, 1 ms NR slot) are exact and timing comparisons never
suffer float drift.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass
from typing import Any, Callable

# Time unit multipliers (nanoseconds).
NS = 1
US = 1_000
MS = 1_000_000
SEC = 1_000_000_000


class SchedulingError(Exception):
    """An event was scheduled before the current virtual time."""


@dataclass(frozen=True)
class Event:
    fire_at: int
    seq: int
    target: str
    payload: Any = None


@dataclass(frozen=True)
class RunSummary:
    events_processed: int
    final_time: int


class RngStream:
    """Independent deterministic random stream keyed by (seed, stream_id).

    The same (seed, stream_id) pair yields the same draw sequence on every
    run and platform; distinct stream_ids never share state, so adding a
    traffic source does not perturb the draws of existing ones.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        digest = hashlib.sha256(f"{seed}:{stream_id}".encode()).digest()
        self._rand = random.Random(int.from_bytes(digest[:8], "big"))

    def random(self) -> float:
        return self._rand.random()

    def uniform(self, a: float, b: float) -> float:
        return self._rand.uniform(a, b)

    def expovariate(self, lambd: float) -> float:
        return self._rand.expovariate(lambd)

    def randrange(self, *args: int) -> int:
        return self._rand.randrange(*args)


class EventLoop:
    """Single-threaded event loop delivering events in (fire_at, seq) order.

    Components register a handler per target name; `schedule` returns a
    ticket usable with `cancel` until the event fires.
    """

    def __init__(self, capture_log: bool = False):
        self._heap: list[tuple[int, int, Event]] = []
        self._now = 0
        self._seq = 0
        self._cancelled: set[int] = set()
        self._handlers: dict[str, Callable[[Event], None]] = {}
        self.count_scheduled = 0
        self.count_delivered = 0
        self.count_cancelled = 0
        self._log_hash = hashlib.sha256()
        self._log: list[tuple[int, int, str]] | None = [] if capture_log else None

    def register(self, target: str, handler: Callable[[Event], None]) -> None:
        self._handlers[target] = handler

    def now(self) -> int:
        return self._now

    def schedule(self, fire_at: int, target: str, payload: Any = None) -> int:
        if fire_at < self._now:
            raise SchedulingError(
                f"cannot schedule at {fire_at} ns, now is {self._now} ns (target={target})"
            )
        seq = self._seq
        self._seq += 1
        event = Event(fire_at, seq, target, payload)
        heapq.heappush(self._heap, (fire_at, seq, event))
        self.count_scheduled += 1
        return seq

    def call_at(self, fire_at: int, fn: Callable[[Event], None], payload: Any = None) -> int:
        """Schedule a one-off callback without registering a named target."""
        target = f"_call_{self._seq}"
        self._handlers[target] = fn
        return self.schedule(fire_at, target, payload)

    def cancel(self, ticket: int) -> None:
        self._cancelled.add(ticket)
        self.count_cancelled += 1

    def pending(self) -> int:
        return self.count_scheduled - self.count_delivered - self.count_cancelled

    def run_until(self, t_end: int) -> RunSummary:
        if t_end < self._now:
            raise SchedulingError(f"t_end {t_end} ns is before now {self._now} ns")
        processed = 0
        while self._heap and self._heap[0][0] <= t_end:
            fire_at, seq, event = heapq.heappop(self._heap)
            if seq in self._cancelled:
                self._cancelled.discard(seq)
                continue
            self._now = fire_at
            handler = self._handlers.get(event.target)
            if handler is None:
                raise KeyError(f"no handler registered for target {event.target!r}")
            self.count_delivered += 1
            processed += 1
            self._log_hash.update(f"{fire_at}:{seq}:{event.target};".encode())
            if self._log is not None:
                self._log.append((fire_at, seq, event.target))
            handler(event)
        self._now = t_end
        return RunSummary(events_processed=processed, final_time=self._now)

    def log_digest(self) -> str:
        """Hex digest over the delivered-event trace, for determinism checks."""
        return self._log_hash.hexdigest()

    @property
    def log(self) -> list[tuple[int, int, str]]:
        if self._log is None:
            raise RuntimeError("event log capture was not enabled")
        return self._log
