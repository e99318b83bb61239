from __future__ import annotations

import random

import pytest

from ratelab.records import OUTCOME_SUCCESS, PHY_FLAG_HT, TelemetryEntry
from ratelab.telemetry import RING_CAPACITY, TelemetryRing, TelemetryScribe, aggregate_stats


def _entry(wcid: int = 1, **kwargs) -> TelemetryEntry:
    return TelemetryEntry(wcid=wcid, **kwargs)


def test_ring_default_capacity():
    assert RING_CAPACITY == 4096
    assert TelemetryRing().capacity == 4096


def test_ring_rejects_nonpositive_capacity():
    with pytest.raises(ValueError):
        TelemetryRing(0)


def test_ring_assigns_monotonic_sequence_numbers():
    ring = TelemetryRing(capacity=8)
    for i in range(5):
        e = ring.record(_entry())
        assert e.seq == i
    assert ring.head == 5
    assert ring.tail == 0
    assert len(ring) == 5


def test_ring_overwrite_oldest_worked_example():
    """5000 writes into a 4096-slot ring: head 5000, tail dragged to 904,
    last seq 4999, snapshot returns exactly the window [904, 5000)."""
    ring = TelemetryRing()
    last = None
    for _ in range(5000):
        last = ring.record(_entry())
    assert ring.head == 5000
    assert ring.tail == 904
    assert last.seq == 4999
    assert len(ring) == 4096

    window = ring.snapshot_read()
    assert len(window) == 4096
    assert [e.seq for e in window] == list(range(904, 5000))
    assert ring.tail == ring.head == 5000
    assert ring.snapshot_read() == []


def test_snapshot_is_at_most_two_contiguous_segments():
    """The drained window is a rotation of the physical buffer: entries'
    physical slots form at most two contiguous runs."""
    ring = TelemetryRing(capacity=16)
    for _ in range(23):  # wraps the physical buffer
        ring.record(_entry())
    window = ring.snapshot_read()
    slots = [e.seq % ring.capacity for e in window]
    breaks = sum(1 for a, b in zip(slots, slots[1:]) if b != a + 1)
    assert breaks <= 1  # one wrap point = two segments


def test_snapshot_drains_then_resumes_where_it_left_off():
    ring = TelemetryRing(capacity=8)
    for _ in range(3):
        ring.record(_entry())
    first = ring.snapshot_read()
    assert [e.seq for e in first] == [0, 1, 2]
    for _ in range(4):
        ring.record(_entry())
    second = ring.snapshot_read()
    assert [e.seq for e in second] == [3, 4, 5, 6]


def test_polling_window_sizes_at_low_and_high_rates():
    """1 s polling at 1,000 fps captures every frame; at 10,000 fps the ring
    caps the window at its 4,096-entry capacity."""
    ring = TelemetryRing()
    for fps, expected in ((1000, 1000), (10_000, 4096)):
        for _ in range(3):  # several polling cycles, all identical
            for _ in range(fps):
                ring.record(_entry())
            assert len(ring.snapshot_read()) == expected


def test_seq_wraps_at_u32_while_counters_stay_absolute():
    ring = TelemetryRing(capacity=4)
    ring.head = ring.tail = 2**32 - 2
    e = ring.record(_entry())
    assert e.seq == 2**32 - 2
    e = ring.record(_entry())
    assert e.seq == 2**32 - 1
    e = ring.record(_entry())
    assert e.seq == 0  # u32 wrap in the packed field
    assert ring.head == 2**32 + 1  # absolute counter does not wrap


def test_aggregate_stats_per_station():
    entries = [
        TelemetryEntry(wcid=1, intended_mcs=5, intended_flags=PHY_FLAG_HT,
                       hw_mcs=5, hw_flags=PHY_FLAG_HT, retry_count=0,
                       outcome_flags=OUTCOME_SUCCESS, rssi=-70),
        TelemetryEntry(wcid=1, intended_mcs=5, intended_flags=PHY_FLAG_HT,
                       hw_mcs=4, hw_flags=PHY_FLAG_HT, retry_count=2,
                       outcome_flags=OUTCOME_SUCCESS, rssi=-72),
        TelemetryEntry(wcid=1, intended_mcs=5, intended_flags=PHY_FLAG_HT,
                       hw_mcs=0, hw_flags=0, retry_count=5,
                       outcome_flags=0, rssi=-74),
        TelemetryEntry(wcid=2, intended_mcs=0, intended_flags=PHY_FLAG_HT,
                       hw_mcs=0, hw_flags=PHY_FLAG_HT, retry_count=0,
                       outcome_flags=OUTCOME_SUCCESS, rssi=-60),
    ]
    stats = aggregate_stats(entries)
    assert sorted(stats) == [1, 2]
    s1 = stats[1]
    assert s1["frames"] == 3
    assert s1["delivery_ratio"] == pytest.approx(2 / 3)
    assert s1["retry_histogram"] == {0: 1, 2: 1, 5: 1}
    assert s1["mean_rssi"] == pytest.approx(-72.0)
    # one of the two successes was delivered by fallback (hw 4 != intended 5)
    assert s1["hw_fallback_fraction"] == pytest.approx(0.5)
    assert stats[2]["delivery_ratio"] == 1.0
    assert stats[2]["hw_fallback_fraction"] == 0.0


def test_aggregate_stats_counts_legacy_fallback():
    entries = [
        TelemetryEntry(wcid=3, intended_mcs=0, intended_flags=PHY_FLAG_HT,
                       hw_mcs=0, hw_flags=0, retry_count=4,
                       outcome_flags=OUTCOME_SUCCESS, rssi=-88),
    ]
    stats = aggregate_stats(entries)
    assert stats[3]["hw_fallback_fraction"] == 1.0


def test_aggregate_stats_empty_input():
    assert aggregate_stats([]) == {}


def test_scribe_clamps_fields():
    e = TelemetryScribe.build(
        timestamp_s=1.5, wcid=7, intended_mcs=5, intended_flags=PHY_FLAG_HT,
        hw_mcs=5, hw_flags=PHY_FLAG_HT, retry_count=999, success=True,
        rssi_dbm=-170.4, frame_length=99_999, aggregate=True,
    )
    assert e.timestamp_us == 1_500_000
    assert e.retry_count == 255
    assert e.rssi == -128
    assert e.frame_length == 0xFFFF
    assert e.outcome_flags == 0x03
    e.pack()  # must be encodable after clamping


def test_ring_under_random_burst_loads_never_exceeds_capacity():
    rng = random.Random(5)
    ring = TelemetryRing(capacity=64)
    expected_next = 0
    for _ in range(200):
        burst = rng.randrange(0, 150)
        for _ in range(burst):
            ring.record(_entry())
        window = ring.snapshot_read()
        assert len(window) == min(burst, 64)
        if window:
            # the window is always the newest entries, oldest dropped
            seqs = [e.seq for e in window]
            assert seqs == list(range(seqs[0], seqs[0] + len(seqs)))
            expected_next += burst
            assert seqs[-1] == (expected_next - 1) & 0xFFFFFFFF
        else:
            expected_next += burst
