"""Scenario files: a single YAML document with exhaustive defaulting,
whole-file validation (all errors reported, not just the first), and a
canonical hash over the fully resolved configuration.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .simcore import MS, US
from .cti import CtiTiming
from .pon import PonConfig
from .ran import MCS_TABLE, SlotConfig, UeTrafficProfile

BACKGROUND_TCONT_BASE = 9000

DEFAULTS: dict = {
    "id": "scenario",
    "duration_ms": 1000,
    "seed": 1,
    "mode": "cti",
    "slot": {
        "duration_us": 1000,
        "prbs_total": 51,
        "k2": 4,
        "ru_processing_delay_us": 50,
        "du_timing_advance_us": 0,
        "iq_bitwidth": 9,
        "per_symbol_overhead_bytes": 36,
    },
    "pon": {
        "frame_duration_us": 125,
        "upstream_rate_bps": 9_953_280_000,
        "guard_bytes": 64,
        "burst_overhead_bytes": 40,
        "sr_poll_interval_us": 500,
        "olt_processing_us": 35,
        "queue_max_bytes": 10_000_000,
    },
    "cti": {
        "lead_time_us": 250,
        "transport_delay_us": 20,
        "jitter_margin_us": 10,
        "drop_rate": 0.0,
        "heartbeat": False,
    },
    "telemetry": {"window_ms": 100},
    "live": {"port": 9900, "pace": 1.0},
    "onus": [],
    "ues": [],
}

ONU_DEFAULTS = {"fiber_km": 10.0, "background": None}
UE_DEFAULTS = {"mcs": 3, "profile": {}}
PROFILE_DEFAULTS = {
    "kind": "constant-rate",
    "mean_rate_mbps": 8.0,
    "on_ms": 20.0,
    "off_ms": 20.0,
    "gop_slots": 8,
    "i_frame_ratio": 4.0,
    "jitter": 0.5,
    "scale": 1.0,
    "packet_bytes": 2000,  # background sources only: emission chunk size
}


class ScenarioError(Exception):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class OnuConfig:
    onu_id: int
    fiber_km: float
    background: UeTrafficProfile | None
    background_packet_bytes: int
    background_tcont: int


@dataclass
class UeConfig:
    ue_id: int
    onu_id: int
    tcont_id: int
    mcs: int
    profile: UeTrafficProfile


@dataclass
class ScenarioConfig:
    scenario_id: str
    duration: int
    seed: int
    mode: str
    slot: SlotConfig
    pon: PonConfig
    cti_timing: CtiTiming
    cti_drop_rate: float
    cti_heartbeat: bool
    onus: list[OnuConfig]
    ues: list[UeConfig]
    telemetry_window: int
    live_port: int
    live_pace: float
    resolved: dict

    @property
    def ue_to_tcont(self) -> dict[int, int]:
        return {u.ue_id: u.tcont_id for u in self.ues}

    @property
    def tcont_to_onu(self) -> dict[int, int]:
        mapping = {u.tcont_id: u.onu_id for u in self.ues}
        for o in self.onus:
            if o.background is not None:
                mapping[o.background_tcont] = o.onu_id
        return mapping

    @property
    def fronthaul_tconts(self) -> set[int]:
        return {u.tcont_id for u in self.ues}

    def scenario_hash(self) -> str:
        blob = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _merge(defaults: dict, overrides: dict | None) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _profile_from(raw: dict | None, errors: list[str], where: str) -> tuple[UeTrafficProfile, dict]:
    resolved = _merge(PROFILE_DEFAULTS, raw or {})
    profile = UeTrafficProfile(
        kind=resolved["kind"],
        mean_rate_bps=float(resolved["mean_rate_mbps"]) * 1e6,
        on_ms=float(resolved["on_ms"]),
        off_ms=float(resolved["off_ms"]),
        gop_slots=int(resolved["gop_slots"]),
        i_frame_ratio=float(resolved["i_frame_ratio"]),
        jitter=float(resolved["jitter"]),
        scale=float(resolved["scale"]),
    )
    errors.extend(f"{where}: {e}" for e in profile.validate())
    return profile, resolved


def resolve(raw: dict) -> ScenarioConfig:
    """Apply defaults and validate; raises ScenarioError listing every problem."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ScenarioError(["scenario document must be a mapping"])

    known = set(DEFAULTS)
    for key in raw:
        if key not in known:
            errors.append(f"unknown top-level key {key!r}")
    doc = _merge(DEFAULTS, {k: v for k, v in raw.items() if k in known})

    slot = SlotConfig(
        slot_duration=int(doc["slot"]["duration_us"]) * US,
        prbs_total=int(doc["slot"]["prbs_total"]),
        k2=int(doc["slot"]["k2"]),
        ru_processing_delay=int(doc["slot"]["ru_processing_delay_us"]) * US,
        du_timing_advance=int(doc["slot"]["du_timing_advance_us"]) * US,
        iq_bitwidth=int(doc["slot"]["iq_bitwidth"]),
        per_symbol_overhead_bytes=int(doc["slot"]["per_symbol_overhead_bytes"]),
    )
    errors.extend(slot.validate())

    pon = PonConfig(
        frame_duration=int(doc["pon"]["frame_duration_us"]) * US,
        upstream_rate_bps=int(doc["pon"]["upstream_rate_bps"]),
        guard_bytes=int(doc["pon"]["guard_bytes"]),
        burst_overhead_bytes=int(doc["pon"]["burst_overhead_bytes"]),
        sr_poll_interval=int(doc["pon"]["sr_poll_interval_us"]) * US,
        olt_processing=int(doc["pon"]["olt_processing_us"]) * US,
        queue_max_bytes=int(doc["pon"]["queue_max_bytes"]),
    )
    errors.extend(pon.validate())

    cti_timing = CtiTiming(
        lead_time=int(doc["cti"]["lead_time_us"]) * US,
        transport_delay=int(doc["cti"]["transport_delay_us"]) * US,
        jitter_margin=int(doc["cti"]["jitter_margin_us"]) * US,
    )
    errors.extend(cti_timing.validate())
    drop_rate = float(doc["cti"]["drop_rate"])
    if not 0.0 <= drop_rate <= 1.0:
        errors.append("cti.drop_rate must be in [0, 1]")

    duration = int(doc["duration_ms"]) * MS
    if duration <= 0:
        errors.append("duration_ms must be > 0")
    mode = doc["mode"]
    if mode not in ("cti", "sr"):
        errors.append(f"mode must be 'cti' or 'sr', got {mode!r}")

    onus: list[OnuConfig] = []
    onu_ids: set[int] = set()
    resolved_onus = []
    for i, raw_onu in enumerate(doc["onus"]):
        entry = _merge(ONU_DEFAULTS, raw_onu)
        if "id" not in entry:
            errors.append(f"onus[{i}]: missing id")
            continue
        onu_id = int(entry["id"])
        if onu_id in onu_ids:
            errors.append(f"onus[{i}]: duplicate onu id {onu_id}")
        onu_ids.add(onu_id)
        background = None
        resolved_bg = None
        if entry.get("background") is not None:
            background, resolved_bg = _profile_from(entry["background"], errors,
                                                    f"onus[{i}].background")
        onus.append(OnuConfig(
            onu_id=onu_id,
            fiber_km=float(entry["fiber_km"]),
            background=background,
            background_packet_bytes=int((resolved_bg or PROFILE_DEFAULTS)["packet_bytes"]),
            background_tcont=BACKGROUND_TCONT_BASE + onu_id,
        ))
        resolved_onus.append({"id": onu_id, "fiber_km": float(entry["fiber_km"]),
                              "background": resolved_bg})
    if not onus:
        errors.append("at least one onu is required")

    ues: list[UeConfig] = []
    ue_ids: set[int] = set()
    tcont_owner: dict[int, int] = {}
    resolved_ues = []
    for i, raw_ue in enumerate(doc["ues"]):
        entry = _merge(UE_DEFAULTS, raw_ue)
        missing = [k for k in ("id", "onu", "tcont") if k not in entry]
        if missing:
            errors.append(f"ues[{i}]: missing {', '.join(missing)}")
            continue
        ue_id, onu_id, tcont_id = int(entry["id"]), int(entry["onu"]), int(entry["tcont"])
        if ue_id in ue_ids:
            errors.append(f"ues[{i}]: duplicate ue id {ue_id}")
        ue_ids.add(ue_id)
        if onu_id not in onu_ids:
            errors.append(f"ues[{i}].onu: unknown onu {onu_id}")
        if tcont_id in tcont_owner and tcont_owner[tcont_id] != onu_id:
            errors.append(f"ues[{i}].tcont: tcont {tcont_id} already belongs to "
                          f"onu {tcont_owner[tcont_id]}")
        tcont_owner.setdefault(tcont_id, onu_id)
        if tcont_id >= BACKGROUND_TCONT_BASE:
            errors.append(f"ues[{i}].tcont: ids >= {BACKGROUND_TCONT_BASE} are reserved "
                          "for background traffic")
        mcs = int(entry["mcs"])
        if mcs not in MCS_TABLE:
            errors.append(f"ues[{i}].mcs: unknown mcs index {mcs}")
            mcs = 0
        profile, resolved_profile = _profile_from(entry.get("profile"), errors,
                                                  f"ues[{i}].profile")
        ues.append(UeConfig(ue_id=ue_id, onu_id=onu_id, tcont_id=tcont_id,
                            mcs=mcs, profile=profile))
        resolved_ues.append({"id": ue_id, "onu": onu_id, "tcont": tcont_id,
                             "mcs": mcs, "profile": resolved_profile})
    if not ues:
        errors.append("at least one ue is required")

    if errors:
        raise ScenarioError(errors)

    resolved = copy.deepcopy(doc)
    resolved["onus"] = resolved_onus
    resolved["ues"] = resolved_ues

    return ScenarioConfig(
        scenario_id=str(doc["id"]),
        duration=duration,
        seed=int(doc["seed"]),
        mode=mode,
        slot=slot,
        pon=pon,
        cti_timing=cti_timing,
        cti_drop_rate=drop_rate,
        cti_heartbeat=bool(doc["cti"]["heartbeat"]),
        onus=onus,
        ues=ues,
        telemetry_window=int(doc["telemetry"]["window_ms"]) * MS,
        live_port=int(doc["live"]["port"]),
        live_pace=float(doc["live"]["pace"]),
        resolved=resolved,
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError([f"cannot read scenario file: {exc}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"parse error: {exc}"]) from exc
    return resolve(raw or {})


def explain_defaults() -> str:
    """YAML dump of every default the loader applies."""
    doc = copy.deepcopy(DEFAULTS)
    onu = dict({"id": 0}, **copy.deepcopy(ONU_DEFAULTS))
    onu["background"] = copy.deepcopy(PROFILE_DEFAULTS)
    doc["onus"] = [onu]
    doc["ues"] = [{"id": 0, "onu": 0, "tcont": 1, "mcs": UE_DEFAULTS["mcs"],
                   "profile": copy.deepcopy(PROFILE_DEFAULTS)}]
    return yaml.safe_dump(doc, sort_keys=True)
