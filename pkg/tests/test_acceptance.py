"""Acceptance gate: one test per headline criterion, each printing a
pass/fail line. These run the shipped scenarios end to end, so they are the
slowest tests in the suite."""

import random
from pathlib import Path

import pytest

from ctipon.cti import CtiCodecError, CtiEntry, CtiReport, decode, encode
from ctipon.pon import Allocation, BwMap, PonConfig, validate_bwmap
from ctipon.runner import Simulation, compare, run_scenario
from ctipon.scenario import load_scenario
from ctipon.telemetry import export_report_json

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def default_comparison():
    return compare(load_scenario(SCENARIOS / "default.yaml"))


def test_cooperative_benefit_ordering(default_comparison):
    """Cooperative grants must beat the polled baseline on the headline
    scenario: strictly lower mean and p99 queue delay, mean ratio >= 2."""
    result = default_comparison
    ratio = result.mean_q_ratio
    ok = (result.cti.mean_q_us < result.sr.mean_q_us
          and result.cti.p99_q_us < result.sr.p99_q_us
          and ratio >= 2.0)
    _verdict("cooperative benefit ordering", ok,
             f"mean {result.cti.mean_q_us} vs {result.sr.mean_q_us} us "
             f"(ratio {round(ratio, 2)}), "
             f"p99 {result.cti.p99_q_us} vs {result.sr.p99_q_us} us")


def test_cooperative_residual_bound():
    """Under truthful reports, no drops, and light load, every fronthaul
    packet waits at most one frame plus the jitter margin (135 us)."""
    cfg = load_scenario(SCENARIOS / "residual.yaml")
    sim = Simulation(cfg, mode="cti", keep_raw=True)
    sim.run()
    samples = sim.collector.raw_samples
    bound_ns = cfg.pon.frame_duration + cfg.cti_timing.jitter_margin
    over = [s for s in samples if s.queue_delay > bound_ns]
    ok = bool(samples) and not over
    worst = max(s.queue_delay for s in samples) / 1000 if samples else None
    _verdict("cooperative residual bound", ok,
             f"{len(samples)} packets, {len(over)} over {bound_ns / 1000} us "
             f"(max {worst} us)")


def test_cti_cadence():
    """Saturated uplink: every 1 ms slot produces a grant, hence one CTI
    report, hence 100 +- 1 reports per 100 ms telemetry window."""
    cfg = load_scenario(SCENARIOS / "saturated.yaml")
    report = run_scenario(cfg, mode="cti")
    counts = [w.cti_msgs for w in report.windows]
    ok = bool(counts) and all(99 <= c <= 101 for c in counts)
    _verdict("cti cadence", ok, f"per-window counts {counts}")


def brute_force_overlap(bwmap: BwMap, guard: int) -> bool:
    allocs = bwmap.allocations
    for i in range(len(allocs)):
        for j in range(i + 1, len(allocs)):
            a, b = allocs[i], allocs[j]
            if (a.start_offset < b.start_offset + b.grant_bytes + guard
                    and b.start_offset < a.start_offset + a.grant_bytes + guard):
                return True
    return False


def test_bwmap_validity():
    """Every frame of every acceptance run validates cleanly, and the
    validator agrees with a quadratic pairwise overlap check on random maps
    of up to 64 allocations."""
    violations = []
    for name in ("default", "residual", "saturated", "minimal"):
        cfg = load_scenario(SCENARIOS / f"{name}.yaml")
        for mode in ("cti", "sr"):
            sim = Simulation(cfg, mode, strict=True)
            sim.run()  # strict mode raises on the first invalid map
            violations.extend(sim.violations)

    cfg = PonConfig()
    rng = random.Random(2024)
    disagreements = 0
    for _ in range(500):
        allocs = sorted(
            (Allocation(rng.randrange(1, 64),
                        rng.randrange(0, cfg.capacity_bytes),
                        rng.randrange(1, 1000) * 4)
             for _ in range(rng.randrange(0, 65))),
            key=lambda a: a.start_offset)
        bwmap = BwMap(0, tuple(allocs))
        flagged = any("overlap" in v for v in validate_bwmap(bwmap, cfg))
        if flagged != brute_force_overlap(bwmap, cfg.guard_bytes):
            disagreements += 1
    ok = not violations and disagreements == 0
    _verdict("bwmap validity", ok,
             f"{len(violations)} run violations, "
             f"{disagreements}/500 cross-check disagreements")


def test_conservation():
    """Per-TCONT bytes: enqueued == drained + still queued, with drops
    accounted; collector sample count equals delivered fronthaul packets."""
    problems = []
    for name in ("default", "residual", "saturated"):
        cfg = load_scenario(SCENARIOS / f"{name}.yaml")
        for mode in ("cti", "sr"):
            sim = Simulation(cfg, mode)
            report = sim.run()
            for tcont_id, q in sim.queues.items():
                if q.enqueued_bytes != q.drained_bytes + q.occupancy_bytes:
                    problems.append(f"{name}/{mode} tcont {tcont_id} bytes")
            if report.samples != sim.fronthaul_sample_count:
                problems.append(f"{name}/{mode} sample count")
            if sim.fabric.total_granted != sim.fabric.total_used + sim.fabric.total_wasted:
                problems.append(f"{name}/{mode} grant accounting")
    _verdict("conservation", not problems, problems or "all runs exact")


def test_codec():
    """10^4 randomized round trips byte-exact; malformed inputs raise the
    documented error types; single-bit mutations never crash the decoder."""
    rng = random.Random(7)
    mismatches = 0
    for _ in range(10_000):
        entries = tuple(
            CtiEntry(rng.randrange(2**16), rng.randrange(2**32),
                     rng.randrange(2**64), rng.randrange(2**64))
            for _ in range(rng.randrange(0, 5)))
        report = CtiReport(1, rng.randrange(2**16), rng.randrange(2**64), entries)
        if decode(encode(report)) != report:
            mismatches += 1

    crashes = 0
    base = encode(CtiReport(1, 3, 999, (CtiEntry(1, 4284, 100, 200),)))
    for _ in range(5_000):
        wire = bytearray(base)
        wire[rng.randrange(len(wire))] ^= 1 << rng.randrange(8)
        try:
            decode(bytes(wire))
        except CtiCodecError:
            pass
        except Exception:
            crashes += 1
    ok = mismatches == 0 and crashes == 0
    _verdict("codec", ok,
             f"{mismatches}/10000 round-trip mismatches, {crashes} fuzz crashes")


def test_determinism():
    """Identical scenario and seed must export byte-identical reports in
    both modes; the two halves of a comparison see the same scenario hash."""
    cfg = load_scenario(SCENARIOS / "residual.yaml")
    same = all(
        export_report_json(run_scenario(cfg, mode))
        == export_report_json(run_scenario(cfg, mode))
        for mode in ("cti", "sr"))
    result = compare(cfg)
    hashes_match = result.cti.scenario_hash == result.sr.scenario_hash
    ok = same and hashes_match
    _verdict("determinism", ok,
             f"byte-identical exports: {same}, compare hashes match: {hashes_match}")


def test_zero_information_equivalence():
    """Cooperative mode with 100% report loss must degrade exactly to the
    baseline: identical per-frame BwMaps on the same seed."""
    raw = load_scenario(SCENARIOS / "default.yaml").resolved
    raw["cti"]["drop_rate"] = 1.0
    from ctipon.scenario import resolve
    cfg = resolve(raw)
    sim_cti = Simulation(cfg, "cti", capture_trace=True)
    sim_cti.run()
    sim_sr = Simulation(cfg, "sr", capture_trace=True)
    sim_sr.run()
    ok = bool(sim_cti.trace) and sim_cti.trace == sim_sr.trace
    _verdict("zero-information equivalence", ok,
             f"{len(sim_cti.trace)} vs {len(sim_sr.trace)} trace lines, "
             f"identical: {sim_cti.trace == sim_sr.trace}")


def test_physics_floor():
    """No packet is delivered faster than its serialization time plus the
    one-way fiber propagation delay."""
    cfg = load_scenario(SCENARIOS / "default.yaml")
    sim = Simulation(cfg, "cti", keep_raw=True)
    sim.run()
    samples = sim.collector.raw_samples + sim.background_samples
    rate = cfg.pon.upstream_rate_bps
    prop = {o.onu_id: int(o.fiber_km * 5000) for o in cfg.onus}
    tcont_onu = cfg.tcont_to_onu
    violators = 0
    floor_min = None
    for s in samples:
        floor = s.bytes * 8 * 10**9 // rate + prop[tcont_onu[s.tcont_id]]
        floor_min = floor if floor_min is None else min(floor_min, floor)
        if s.total_delay < floor:
            violators += 1
    ok = bool(samples) and violators == 0
    min_t = min(s.total_delay for s in samples) / 1000 if samples else None
    _verdict("physics floor", ok,
             f"{len(samples)} packets, {violators} below floor "
             f"(min total {min_t} us, smallest floor {floor_min and floor_min / 1000} us)")
