import random
import struct

import pytest
from hypothesis import given, strategies as st

from ctipon.cti import (
    ENTRY_LEN,
    HEADER_LEN,
    MAX_ENTRIES,
    BadMagic,
    CtiCodecError,
    CtiEntry,
    CtiReport,
    CtiSender,
    CtiTiming,
    EntryCountOverflow,
    LengthMismatch,
    TruncatedMessage,
    UnmappedUeError,
    VersionMismatch,
    build_report,
    decode,
    earliest_grant_time,
    encode,
)
from ctipon.ran import SlotConfig, UplinkGrant, arrival_time, fronthaul_bytes_for_grant, tbs_from_prbs
from ctipon.simcore import US


def grant(ue_id=0, n_prbs=10, tx_slot=4, mcs=0):
    return UplinkGrant(grant_slot=tx_slot - 4, tx_slot=tx_slot, ue_id=ue_id,
                       n_prbs=n_prbs, tbs_bytes=tbs_from_prbs(n_prbs, mcs))


entry_strategy = st.builds(
    CtiEntry,
    tcont_id=st.integers(0, 0xFFFF),
    expected_bytes=st.integers(0, 0xFFFFFFFF),
    arrival_start=st.integers(0, 2**64 - 1),
    arrival_end=st.integers(0, 2**64 - 1),
)
report_strategy = st.builds(
    CtiReport,
    version=st.just(1),
    seq=st.integers(0, 0xFFFF),
    report_time=st.integers(0, 2**64 - 1),
    entries=st.lists(entry_strategy, max_size=8).map(tuple),
)


# --- wire format -------------------------------------------------------------

def test_encoded_lengths():
    empty = CtiReport(version=1, seq=0, report_time=0, entries=())
    assert len(encode(empty)) == HEADER_LEN == 18
    three = CtiReport(version=1, seq=1, report_time=5, entries=(
        CtiEntry(1, 100, 10, 20),
        CtiEntry(2, 200, 10, 20),
        CtiEntry(3, 300, 10, 20),
    ))
    assert len(encode(three)) == 18 + 3 * ENTRY_LEN == 84


def test_encoded_header_bytes_exact():
    report = CtiReport(version=1, seq=0x0102, report_time=0x0A0B0C0D, entries=())
    # Independently packed big-endian header.
    expected = b"CTI1" + bytes([1, 1]) + struct.pack(">H", 0x0102) \
        + struct.pack(">Q", 0x0A0B0C0D) + struct.pack(">H", 0)
    assert encode(report) == expected


def test_entry_field_layout():
    report = CtiReport(version=1, seq=0, report_time=0,
                       entries=(CtiEntry(0x1122, 0x33445566, 0x0708, 0x090A),))
    wire = encode(report)
    assert wire[18:20] == b"\x11\x22"
    assert wire[20:24] == b"\x33\x44\x55\x66"
    assert wire[24:32] == struct.pack(">Q", 0x0708)
    assert wire[32:40] == struct.pack(">Q", 0x090A)


@given(report_strategy)
def test_round_trip(report):
    assert decode(encode(report)) == report


def test_round_trip_randomized_bulk():
    rng = random.Random(1234)
    for _ in range(10_000):
        entries = tuple(
            CtiEntry(rng.randrange(2**16), rng.randrange(2**32),
                     rng.randrange(2**64), rng.randrange(2**64))
            for _ in range(rng.randrange(0, 6))
        )
        report = CtiReport(version=1, seq=rng.randrange(2**16),
                           report_time=rng.randrange(2**64), entries=entries)
        assert decode(encode(report)) == report


def test_decode_truncated():
    with pytest.raises(TruncatedMessage):
        decode(b"CTI1\x01\x01")


def test_decode_bad_magic():
    wire = bytearray(encode(CtiReport(1, 0, 0, ())))
    wire[0:4] = b"XXXX"
    with pytest.raises(BadMagic):
        decode(bytes(wire))


def test_decode_version_mismatch():
    wire = bytearray(encode(CtiReport(1, 0, 0, ())))
    wire[4] = 9
    with pytest.raises(VersionMismatch):
        decode(bytes(wire))


def test_decode_length_mismatch():
    wire = encode(CtiReport(1, 0, 0, (CtiEntry(1, 2, 3, 4),)))
    with pytest.raises(LengthMismatch):
        decode(wire[:-1])
    with pytest.raises(LengthMismatch):
        decode(wire + b"\x00")


def test_encode_entry_count_overflow():
    entries = tuple(CtiEntry(i, 1, 0, 1) for i in range(MAX_ENTRIES + 1))
    with pytest.raises(EntryCountOverflow):
        encode(CtiReport(1, 0, 0, entries))


def test_single_byte_mutation_never_crashes():
    base = encode(CtiReport(1, 7, 1_000_000, (CtiEntry(1, 4284, 5_050_000, 5_070_000),
                                              CtiEntry(2, 100, 5_050_000, 5_070_000))))
    rng = random.Random(99)
    for _ in range(2_000):
        wire = bytearray(base)
        wire[rng.randrange(len(wire))] ^= 1 << rng.randrange(8)
        try:
            decoded = decode(bytes(wire))
        except CtiCodecError:
            continue
        # Mutations outside magic/version/count fields still decode; the
        # result must stay structurally sound.
        assert len(decoded.entries) == 2


def test_random_garbage_raises_codec_errors_only():
    rng = random.Random(5)
    for _ in range(2_000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
        try:
            decode(blob)
        except CtiCodecError:
            pass


# --- report construction ------------------------------------------------------

def test_build_report_empty():
    assert build_report([], 0, SlotConfig(), {}, seq=0) is None


def test_build_report_aggregates_per_tcont():
    cfg = SlotConfig()
    grants = [grant(ue_id=0, n_prbs=10), grant(ue_id=1, n_prbs=5), grant(ue_id=2, n_prbs=7)]
    report = build_report(grants, 0, cfg, {0: 1, 1: 1, 2: 2}, seq=3)
    assert report.seq == 3
    assert report.report_time == 0
    assert [e.tcont_id for e in report.entries] == [1, 2]
    fh = lambda g: fronthaul_bytes_for_grant(g, cfg.iq_bitwidth, cfg.per_symbol_overhead_bytes)
    assert report.entries[0].expected_bytes == fh(grants[0]) + fh(grants[1])
    assert report.entries[1].expected_bytes == fh(grants[2])


def test_build_report_arrival_window():
    cfg = SlotConfig()
    g = grant(ue_id=0, n_prbs=10, tx_slot=4)
    report = build_report([g], 0, cfg, {0: 1}, seq=0, jitter_margin=10 * US)
    t = arrival_time(g, cfg)
    assert report.entries[0].arrival_start == t - 10 * US
    assert report.entries[0].arrival_end == t + 10 * US


def test_build_report_unmapped_ue():
    with pytest.raises(UnmappedUeError):
        build_report([grant(ue_id=5)], 0, SlotConfig(), {0: 1}, seq=0)


def test_earliest_grant_time():
    timing = CtiTiming()
    early = CtiEntry(1, 100, arrival_start=10_000_000, arrival_end=10_020_000)
    # Lead time dominates when the burst arrives before receipt + lead.
    assert earliest_grant_time(9_900_000, timing, early) == 10_150_000
    # Arrival dominates when the report lands far ahead of the burst.
    assert earliest_grant_time(1_000_000, timing, early) == 10_000_000


def test_sender_seq_wraps_and_counts():
    sender = CtiSender()
    cfg = SlotConfig()
    sender._seq = 0xFFFE
    r1 = sender.next_report([grant(ue_id=0)], 0, cfg, {0: 1})
    r2 = sender.next_report([grant(ue_id=0)], 1, cfg, {0: 1})
    r3 = sender.next_report([grant(ue_id=0)], 2, cfg, {0: 1})
    assert (r1.seq, r2.seq, r3.seq) == (0xFFFE, 0xFFFF, 0)
    assert sender.sent_reports == 3
    assert sender.next_report([], 3, cfg, {0: 1}) is None


def test_sender_heartbeat_emits_empty_report():
    sender = CtiSender(heartbeat=True)
    report = sender.next_report([], 0, SlotConfig(), {})
    assert report is not None and report.entries == ()
