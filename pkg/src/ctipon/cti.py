"""Cooperative Transport Interface: per-slot DU-to-OLT burst notifications.

Wire format (big-endian, versioned, fixed width):
  header (18 bytes): magic "CTI1", version u8 = 1, msg_type u8 = 1,
                     seq u16, report_time u64 (ns), entry_count u16
  entry (22 bytes):  tcont_id u16, expected_bytes u32,
                     arrival_start u64 (ns), arrival_end u64 (ns)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .simcore import US
from .ran import SlotConfig, UplinkGrant, arrival_time, fronthaul_bytes_for_grant

MAGIC = b"CTI1"
VERSION = 1
MSG_TYPE_GRANT_REPORT = 1
MAX_ENTRIES = 1024

_HEADER = struct.Struct(">4sBBHQH")
_ENTRY = struct.Struct(">HIQQ")

HEADER_LEN = _HEADER.size   # 18
ENTRY_LEN = _ENTRY.size     # 22


class CtiCodecError(Exception):
    """Base class for wire-format errors."""


class BadMagic(CtiCodecError):
    pass


class TruncatedMessage(CtiCodecError):
    pass


class VersionMismatch(CtiCodecError):
    pass


class LengthMismatch(CtiCodecError):
    pass


class EntryCountOverflow(CtiCodecError):
    pass


class UnmappedUeError(Exception):
    """A grant's ue_id has no TCONT mapping."""


@dataclass(frozen=True)
class CtiEntry:
    tcont_id: int
    expected_bytes: int
    arrival_start: int
    arrival_end: int


@dataclass(frozen=True)
class CtiReport:
    version: int
    seq: int
    report_time: int
    entries: tuple[CtiEntry, ...]


@dataclass
class CtiTiming:
    lead_time: int = 250 * US
    transport_delay: int = 20 * US
    jitter_margin: int = 10 * US

    def validate(self) -> list[str]:
        errors = []
        if self.lead_time < 0:
            errors.append("cti.lead_time must be >= 0")
        if self.transport_delay < 0:
            errors.append("cti.transport_delay must be >= 0")
        return errors


def build_report(grants: list[UplinkGrant], slot_index: int, cfg: SlotConfig,
                 ue_to_tcont: dict[int, int], seq: int,
                 jitter_margin: int = 10 * US) -> CtiReport | None:
    """Aggregate one slot's grants into per-TCONT expected-burst entries.

    Returns None when there is nothing to report (heartbeats are the
    sender's concern). The arrival window is the [min, max] burst arrival
    over contributing grants, widened by the jitter margin on both sides.
    """
    if not grants:
        return None
    per_tcont: dict[int, list[UplinkGrant]] = {}
    for grant in grants:
        if grant.ue_id not in ue_to_tcont:
            raise UnmappedUeError(f"ue {grant.ue_id} has no tcont mapping")
        per_tcont.setdefault(ue_to_tcont[grant.ue_id], []).append(grant)

    entries = []
    for tcont_id in sorted(per_tcont):
        group = per_tcont[tcont_id]
        expected = sum(
            fronthaul_bytes_for_grant(g, cfg.iq_bitwidth, cfg.per_symbol_overhead_bytes)
            for g in group
        )
        if expected <= 0:
            continue
        arrivals = [arrival_time(g, cfg) for g in group]
        entries.append(CtiEntry(
            tcont_id=tcont_id,
            expected_bytes=expected,
            arrival_start=max(0, min(arrivals) - jitter_margin),
            arrival_end=max(arrivals) + jitter_margin,
        ))
    if not entries:
        return None
    return CtiReport(version=VERSION, seq=seq & 0xFFFF,
                     report_time=slot_index * cfg.slot_duration,
                     entries=tuple(entries))


def encode(report: CtiReport) -> bytes:
    if len(report.entries) > MAX_ENTRIES:
        raise EntryCountOverflow(f"{len(report.entries)} entries exceed {MAX_ENTRIES}")
    out = bytearray(_HEADER.pack(MAGIC, report.version, MSG_TYPE_GRANT_REPORT,
                                 report.seq, report.report_time, len(report.entries)))
    for e in report.entries:
        out += _ENTRY.pack(e.tcont_id, e.expected_bytes, e.arrival_start, e.arrival_end)
    return bytes(out)


def decode(data: bytes) -> CtiReport:
    if len(data) < HEADER_LEN:
        raise TruncatedMessage(f"message is {len(data)} bytes, header needs {HEADER_LEN}")
    magic, version, msg_type, seq, report_time, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION or msg_type != MSG_TYPE_GRANT_REPORT:
        raise VersionMismatch(f"version {version}, msg_type {msg_type}")
    expected_len = HEADER_LEN + ENTRY_LEN * count
    if len(data) != expected_len:
        raise LengthMismatch(
            f"length {len(data)} inconsistent with entry count {count} "
            f"(expected {expected_len})"
        )
    entries = []
    for i in range(count):
        tcont_id, expected_bytes, arrival_start, arrival_end = _ENTRY.unpack_from(
            data, HEADER_LEN + i * ENTRY_LEN)
        entries.append(CtiEntry(tcont_id, expected_bytes, arrival_start, arrival_end))
    return CtiReport(version=version, seq=seq, report_time=report_time,
                     entries=tuple(entries))


def earliest_grant_time(receipt_time: int, timing: CtiTiming, entry: CtiEntry) -> int:
    """Earliest instant a grant may be placed for this entry."""
    return max(receipt_time + timing.lead_time, entry.arrival_start)


@dataclass
class CtiSender:
    """Per-DU sender state: wrapping sequence counter and emission stats."""
    timing: CtiTiming = field(default_factory=CtiTiming)
    heartbeat: bool = False
    _seq: int = 0
    sent_reports: int = 0
    sent_entry_bytes: int = 0

    def next_report(self, grants: list[UplinkGrant], slot_index: int, cfg: SlotConfig,
                    ue_to_tcont: dict[int, int]) -> CtiReport | None:
        report = build_report(grants, slot_index, cfg, ue_to_tcont, self._seq,
                              jitter_margin=self.timing.jitter_margin)
        if report is None:
            if not self.heartbeat:
                return None
            report = CtiReport(version=VERSION, seq=self._seq & 0xFFFF,
                               report_time=slot_index * cfg.slot_duration, entries=())
        self._seq = (self._seq + 1) & 0xFFFF
        self.sent_reports += 1
        self.sent_entry_bytes += sum(e.expected_bytes for e in report.entries)
        return report
