"""Uplink RAN model: UE traffic generation, a round-robin DU MAC scheduler,
and the mapping from uplink grants to the fronthaul bursts the ONU carries.

In a 7.2a split the uplink fronthaul volume follows the granted PRBs, not the
actual UE payload, so every grant produces a burst sized from the grant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .simcore import MS, US, RngStream

SUBCARRIERS_PER_PRB = 12
SYMBOLS_PER_SLOT = 14

# mcs index -> (bits per symbol, code rate)
MCS_TABLE: dict[int, tuple[int, float]] = {
    0: (2, 0.5),    # QPSK
    1: (4, 0.5),    # 16QAM
    2: (4, 0.75),
    3: (6, 0.75),   # 64QAM
    4: (6, 0.925),
}


class UnknownMcsError(Exception):
    pass


class TimingError(Exception):
    """The configured timing chain produced a negative arrival time."""


@dataclass
class SlotConfig:
    slot_duration: int = 1 * MS
    prbs_total: int = 51
    k2: int = 4
    ru_processing_delay: int = 50 * US
    du_timing_advance: int = 0
    iq_bitwidth: int = 9
    per_symbol_overhead_bytes: int = 36

    def validate(self) -> list[str]:
        errors = []
        if self.slot_duration <= 0:
            errors.append("slot.duration must be > 0")
        if self.prbs_total <= 0:
            errors.append("slot.prbs_total must be > 0")
        if self.k2 < 1:
            errors.append("slot.k2 must be >= 1")
        if not 4 <= self.iq_bitwidth <= 16:
            errors.append("slot.iq_bitwidth must be in [4, 16]")
        return errors


@dataclass
class UeTrafficProfile:
    kind: str = "constant-rate"  # constant-rate | on-off | video-like
    mean_rate_bps: float = 8e6
    on_ms: float = 20.0          # on-off: mean on duration
    off_ms: float = 20.0         # on-off: mean off duration
    gop_slots: int = 8           # video-like: slots per group of pictures
    i_frame_ratio: float = 4.0   # video-like: I-frame size vs P-frame
    jitter: float = 0.5          # video-like: +- relative size jitter
    scale: float = 1.0           # live-steering multiplier

    def validate(self) -> list[str]:
        errors = []
        if self.kind not in ("constant-rate", "on-off", "video-like"):
            errors.append(f"unknown traffic profile kind {self.kind!r}")
        if self.mean_rate_bps < 0:
            errors.append("profile.mean_rate must be >= 0")
        if self.scale < 0:
            errors.append("profile.scale must be >= 0")
        return errors


@dataclass
class UeState:
    ue_id: int
    profile: UeTrafficProfile
    mcs: int
    rng: RngStream
    buffer_bytes: int = 0
    pending_grant_bytes: int = 0   # granted, awaiting tx_slot debit
    generated_bytes: int = 0
    transmitted_bytes: int = 0
    padding_bytes: int = 0
    _credit: float = 0.0
    _onoff_on: bool = False  # toggles to on at the first draw
    _onoff_remaining_ns: float = 0.0


@dataclass(frozen=True)
class UplinkGrant:
    grant_slot: int
    tx_slot: int
    ue_id: int
    n_prbs: int
    tbs_bytes: int


@dataclass(frozen=True)
class FronthaulPacket:
    packet_id: int
    bytes: int
    created_at: int
    grant: UplinkGrant


def tbs_from_prbs(n_prbs: int, mcs: int) -> int:
    """Transport block bytes for a PRB count: resource-element product, floored."""
    if mcs not in MCS_TABLE:
        raise UnknownMcsError(f"unknown mcs index {mcs}")
    if n_prbs < 0:
        raise ValueError("n_prbs must be >= 0")
    bits_per_symbol, code_rate = MCS_TABLE[mcs]
    res = n_prbs * SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT
    return math.floor(res * bits_per_symbol * code_rate / 8)


def fronthaul_bytes_for_grant(grant: UplinkGrant, iq_bitwidth: int,
                              per_symbol_overhead: int) -> int:
    """Upstream fronthaul burst size: frequency-domain IQ for the granted PRBs
    plus per-symbol framing. Zero PRBs emit no sections at all."""
    if not 4 <= iq_bitwidth <= 16:
        raise ValueError("iq_bitwidth must be in [4, 16]")
    if grant.n_prbs == 0:
        return 0
    bits_per_symbol = grant.n_prbs * SUBCARRIERS_PER_PRB * 2 * iq_bitwidth
    bytes_per_symbol = (bits_per_symbol + 7) // 8
    return SYMBOLS_PER_SLOT * (bytes_per_symbol + per_symbol_overhead)


def arrival_time(grant: UplinkGrant, cfg: SlotConfig) -> int:
    """Instant the grant's fronthaul burst reaches the ONU ingress."""
    t = (grant.tx_slot * cfg.slot_duration + cfg.slot_duration
         + cfg.ru_processing_delay - cfg.du_timing_advance)
    if t < 0:
        raise TimingError(
            f"du_timing_advance {cfg.du_timing_advance} ns exceeds the timing chain"
        )
    return t


def gen_traffic(ue: UeState, slot_index: int, slot_duration: int) -> int:
    """Add one slot's worth of uplink demand to the UE buffer; returns bytes added."""
    profile = ue.profile
    if profile.scale <= 0 or profile.mean_rate_bps <= 0:
        return 0
    dt_s = slot_duration / 1e9

    if profile.kind == "constant-rate":
        ue._credit += profile.mean_rate_bps * dt_s / 8 * profile.scale
    elif profile.kind == "on-off":
        remaining = slot_duration
        active_ns = 0.0
        while remaining > 0:
            if ue._onoff_remaining_ns <= 0:
                ue._onoff_on = not ue._onoff_on
                mean = profile.on_ms if ue._onoff_on else profile.off_ms
                ue._onoff_remaining_ns = ue.rng.expovariate(1.0 / max(mean, 1e-9)) * 1e6
            step = min(remaining, ue._onoff_remaining_ns)
            if ue._onoff_on:
                active_ns += step
            ue._onoff_remaining_ns -= step
            remaining -= step
        duty = profile.on_ms / (profile.on_ms + profile.off_ms)
        peak_rate = profile.mean_rate_bps / max(duty, 1e-9)
        ue._credit += peak_rate * (active_ns / 1e9) / 8 * profile.scale
    elif profile.kind == "video-like":
        mean_mult = (profile.i_frame_ratio + profile.gop_slots - 1) / profile.gop_slots
        base = profile.mean_rate_bps * dt_s / 8 / mean_mult
        size = base * (profile.i_frame_ratio if slot_index % profile.gop_slots == 0 else 1.0)
        size *= ue.rng.uniform(1.0 - profile.jitter, 1.0 + profile.jitter)
        ue._credit += size * profile.scale
    else:
        raise ValueError(f"unknown traffic profile kind {profile.kind!r}")

    added = int(ue._credit)
    ue._credit -= added
    ue.buffer_bytes += added
    ue.generated_bytes += added
    return added


def schedule_slot(slot_index: int, ues: list[UeState], cfg: SlotConfig) -> list[UplinkGrant]:
    """Round-robin PRB split among backlogged UEs; whole PRBs, remainder to
    lower ue_id, each UE capped at the PRBs its backlog needs."""
    active = sorted((ue for ue in ues if ue.buffer_bytes - ue.pending_grant_bytes > 0),
                    key=lambda u: u.ue_id)
    if not active:
        return []

    needed = []
    for ue in active:
        prb_bytes = tbs_from_prbs(1, ue.mcs)
        backlog = max(0, ue.buffer_bytes - ue.pending_grant_bytes)
        needed.append(max(1, -(-backlog // prb_bytes)))

    n = len(active)
    base, rem = divmod(cfg.prbs_total, n)
    alloc = [min(needed[i], base + (1 if i < rem else 0)) for i in range(n)]
    leftover = cfg.prbs_total - sum(alloc)
    # hand spare PRBs to still-hungry UEs in ascending ue_id order
    changed = True
    while leftover > 0 and changed:
        changed = False
        for i in range(n):
            if leftover == 0:
                break
            extra = min(needed[i] - alloc[i], leftover)
            if extra > 0:
                alloc[i] += extra
                leftover -= extra
                changed = True

    grants = []
    for ue, n_prbs in zip(active, alloc):
        if n_prbs <= 0:
            continue
        tbs = tbs_from_prbs(n_prbs, ue.mcs)
        grants.append(UplinkGrant(grant_slot=slot_index, tx_slot=slot_index + cfg.k2,
                                  ue_id=ue.ue_id, n_prbs=n_prbs, tbs_bytes=tbs))
        ue.pending_grant_bytes += tbs
    return grants


def apply_tx_debit(ue: UeState, grant: UplinkGrant) -> None:
    """Debit the UE buffer when the grant's tx_slot is reached; shortfall is padding."""
    debit = min(grant.tbs_bytes, ue.buffer_bytes)
    ue.buffer_bytes -= debit
    ue.pending_grant_bytes -= grant.tbs_bytes
    ue.transmitted_bytes += debit
    ue.padding_bytes += grant.tbs_bytes - debit
