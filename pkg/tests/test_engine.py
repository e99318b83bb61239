from __future__ import annotations

import random
import threading

import pytest

from ratelab.engine import (
    EngineError,
    FixedPolicy,
    FrameTypePolicy,
    InvalidWcid,
    MapGeometryError,
    PerStationPolicy,
    PolicyEngine,
    PolicyError,
    ProgramPolicy,
    RoundRobinPolicy,
    entry_to_rate,
    rate_to_entry,
)
from ratelab.phy import RateSpec, TxOutcome, airtime_us
from ratelab.records import RateMapEntry, StatsEntry


def _ok(mcs: int = 4, retries: int = 0) -> TxOutcome:
    return TxOutcome(success=True, retry_count=retries, hw_mcs_used=mcs,
                     hw_rate_flags=0x08,
                     airtime_us=airtime_us(RateSpec(mcs=mcs), 1500, 50.0))


def _fail(mcs: int = 0, retries: int = 5) -> TxOutcome:
    return TxOutcome(success=False, retry_count=retries, hw_mcs_used=mcs,
                     hw_rate_flags=0, airtime_us=1000.0)


def test_wcid_bounds_are_enforced():
    eng = PolicyEngine()
    for bad in (0, 128, -1, 129):
        with pytest.raises(InvalidWcid):
            eng.get_rate(bad)
        with pytest.raises(InvalidWcid):
            eng.on_tx_completion(bad, _ok(), RateSpec(mcs=4), 1500, 0.0)
    for ok in (1, 64, 127):
        eng.get_rate(ok)


def test_rate_map_accepts_slot_zero_but_datapath_does_not_use_it():
    eng = PolicyEngine()
    eng.write_rate_map(0, RateMapEntry(mcs=1, valid=1))
    with pytest.raises(InvalidWcid):
        eng.write_rate_map(128, RateMapEntry())


def test_unknown_frame_type_rejected():
    eng = PolicyEngine()
    with pytest.raises(EngineError):
        eng.get_rate(1, "beacon")


def test_fixed_policy_returns_configured_rate():
    eng = PolicyEngine()
    eng.set_policy(FixedPolicy(RateSpec(mcs=6)))
    assert all(eng.get_rate(w).mcs == 6 for w in (1, 5, 127))


def test_per_station_policy_overrides_and_default():
    eng = PolicyEngine()
    eng.set_policy(PerStationPolicy.of({5: RateSpec(mcs=7)}, RateSpec(mcs=2)))
    assert eng.get_rate(5).mcs == 7
    assert eng.get_rate(6).mcs == 2


def test_frame_type_policy_routes_by_type():
    eng = PolicyEngine()
    eng.set_policy(FrameTypePolicy(mgmt=RateSpec(mcs=0), ctrl=RateSpec(mcs=1),
                                   data=RateSpec(mcs=5)))
    assert eng.get_rate(1, "mgmt").mcs == 0
    assert eng.get_rate(1, "ctrl").mcs == 1
    assert eng.get_rate(1, "data").mcs == 5


def test_round_robin_worked_sequence():
    """Rates [0, 4, 7] with two frames per rate: 0 0 4 4 7 7 then wrap."""
    eng = PolicyEngine()
    eng.set_policy(RoundRobinPolicy(
        (RateSpec(mcs=0), RateSpec(mcs=4), RateSpec(mcs=7)), frames_per_rate=2))
    seq = [eng.get_rate(1).mcs for _ in range(7)]
    assert seq == [0, 0, 4, 4, 7, 7, 0]


def test_round_robin_cycle_property():
    rng = random.Random(3)
    for _ in range(20):
        rates = tuple(RateSpec(mcs=rng.randrange(8))
                      for _ in range(rng.randrange(1, 6)))
        n = rng.randrange(1, 5)
        eng = PolicyEngine()
        eng.set_policy(RoundRobinPolicy(rates, n))
        cycle = len(rates) * n
        seq = [eng.get_rate(1).mcs for _ in range(3 * cycle)]
        expected_cycle = [r.mcs for r in rates for _ in range(n)]
        assert seq == expected_cycle * 3


def test_round_robin_rotation_is_global_across_stations():
    eng = PolicyEngine()
    eng.set_policy(RoundRobinPolicy((RateSpec(mcs=0), RateSpec(mcs=7)), 1))
    assert eng.get_rate(1).mcs == 0
    assert eng.get_rate(2).mcs == 7  # continues the same rotation
    assert eng.get_rate(3).mcs == 0


def test_round_robin_validation():
    with pytest.raises(PolicyError):
        RoundRobinPolicy((), 1)
    with pytest.raises(PolicyError):
        RoundRobinPolicy((RateSpec(mcs=0),), 0)


def test_program_mode_requires_attached_program():
    eng = PolicyEngine()
    with pytest.raises(PolicyError, match="no-program-attached"):
        eng.set_policy(ProgramPolicy("ghost"))
    eng.attach_program("p1")
    eng.set_policy(ProgramPolicy("p1"))  # now legal


def test_program_mode_reads_rate_map_with_default_fallback():
    eng = PolicyEngine()
    eng.attach_program("p1")
    eng.set_policy(ProgramPolicy("p1"))
    assert eng.get_rate(9) == eng.default_program_rate  # invalid slot
    eng.write_rate_map(9, rate_to_entry(RateSpec(mcs=6)))
    assert eng.get_rate(9).mcs == 6


def test_generation_counter_amortizes_pushes():
    """A policy change costs one push per active station, not one per frame."""
    eng = PolicyEngine()
    eng.set_policy(FixedPolicy(RateSpec(mcs=3)))
    for _ in range(100):
        eng.get_rate(1)
        eng.get_rate(2)
    assert eng.push_count == 2  # one refresh per station

    eng.set_policy(FixedPolicy(RateSpec(mcs=5)))
    for _ in range(50):
        eng.get_rate(1)
        eng.get_rate(2)
    assert eng.push_count == 4


def test_set_policy_bumps_generation_but_map_writes_do_not():
    eng = PolicyEngine()
    g0 = eng.rate_generation
    eng.set_policy(FixedPolicy(RateSpec(mcs=1)))
    assert eng.rate_generation == g0 + 1
    eng.write_rate_map(3, RateMapEntry(mcs=2, valid=1))
    assert eng.rate_generation == g0 + 1


def test_program_mode_repushes_only_on_value_change():
    eng = PolicyEngine()
    eng.attach_program("p1")
    eng.set_policy(ProgramPolicy("p1"))
    eng.get_rate(4)
    base = eng.push_count

    # rewriting the identical entry is not a change
    eng.write_rate_map(4, RateMapEntry())
    for _ in range(10):
        eng.get_rate(4)
    assert eng.push_count == base

    # a value change is picked up exactly once
    eng.write_rate_map(4, rate_to_entry(RateSpec(mcs=2)))
    for _ in range(10):
        assert eng.get_rate(4).mcs == 2
    assert eng.push_count == base + 1

    # equal re-write of the new value: still no push
    eng.write_rate_map(4, rate_to_entry(RateSpec(mcs=2)))
    eng.get_rate(4)
    assert eng.push_count == base + 1


def test_stats_flush_cadence_63_64():
    eng = PolicyEngine()
    for _ in range(63):
        eng.on_tx_completion(1, _ok(), RateSpec(mcs=4), 1500, 0.0)
    assert eng.stats_map[1].tx_total == 0
    assert eng.stats_map[1].flush_count == 0

    eng.on_tx_completion(1, _ok(), RateSpec(mcs=4), 1500, 0.0)
    assert eng.stats_map[1].tx_total == 64
    assert eng.stats_map[1].tx_success == 64
    assert eng.stats_map[1].flush_count == 1


def test_stats_flush_cadence_is_exactly_every_64_per_station():
    eng = PolicyEngine()
    flush_events = []
    for i in range(1, 641):
        eng.on_tx_completion(7, _ok(), RateSpec(mcs=4), 1500, 0.0)
        if eng.stats_map[7].flush_count == len(flush_events) + 1:
            flush_events.append(i)
    assert flush_events == [64 * k for k in range(1, 11)]


def test_ewma_per_mille_floor_arithmetic():
    """16 failures in a 64-frame batch is 250 per-mille; the EWMA step adds
    (250 - 0) >> 3 = 31."""
    eng = PolicyEngine()
    for i in range(64):
        out = _fail() if i < 16 else _ok()
        eng.on_tx_completion(1, out, RateSpec(mcs=4), 1500, 0.0)
    assert eng.stats_map[1].ewma_per == 31

    # a clean second batch decays it: 31 + ((0 - 31) >> 3) = 31 + (-4) = 27
    for _ in range(64):
        eng.on_tx_completion(1, _ok(), RateSpec(mcs=4), 1500, 0.0)
    assert eng.stats_map[1].ewma_per == 27


def test_completion_context_counters_include_current_frame():
    eng = PolicyEngine()
    eng.note_signal(1, -67.4, -66.2)
    ctx = eng.on_tx_completion(1, _ok(mcs=5, retries=2), RateSpec(mcs=5), 1200, 1.5)
    assert ctx.wcid == 1
    assert ctx.success == 1
    assert ctx.mcs_used == 5
    assert ctx.retry_count == 2
    assert ctx.tx_total == 1
    assert ctx.tx_success == 1
    assert ctx.tx_retries == 2
    assert ctx.signal == -67
    assert ctx.ack_signal == -66
    assert ctx.frame_length == 1200
    assert ctx.timestamp_ns == 1_500_000_000
    assert ctx.hw_mcs_used == 5
    assert ctx.hw_rate_flags == 0x08


def test_context_ewma_is_fresh_on_the_flush_frame():
    """The 64th completion flushes before the context is built, so that
    frame's controller sees the new EWMA, not the stale zero."""
    eng = PolicyEngine()
    ctx = None
    for _ in range(64):
        ctx = eng.on_tx_completion(1, _fail(), RateSpec(mcs=4), 1500, 0.0)
    assert ctx.ewma_per == (1000 - 0) >> 3  # all-failure batch
    assert eng.stats_map[1].ewma_per == ctx.ewma_per


def test_telemetry_entry_recorded_per_completion():
    eng = PolicyEngine()
    eng.note_signal(2, -71.0)
    eng.on_tx_completion(2, _ok(mcs=3), RateSpec(mcs=3), 900, 0.25)
    entries = eng.telemetry.snapshot_read()
    assert len(entries) == 1
    e = entries[0]
    assert e.wcid == 2
    assert e.intended_mcs == 3
    assert e.hw_mcs == 3
    assert e.rssi == -71
    assert e.frame_length == 900
    assert e.timestamp_us == 250_000
    assert e.success


def test_live_counters_are_per_station():
    eng = PolicyEngine()
    eng.on_tx_completion(1, _ok(), RateSpec(mcs=4), 1500, 0.0)
    ctx = eng.on_tx_completion(2, _ok(), RateSpec(mcs=4), 1500, 0.0)
    assert ctx.tx_total == 1  # not 2


def test_swap_map_geometry_checks():
    eng = PolicyEngine()
    with pytest.raises(MapGeometryError):
        eng.swap_map("rate", [RateMapEntry()] * 127)
    with pytest.raises(MapGeometryError):
        eng.swap_map("rate", [StatsEntry()] * 128)
    with pytest.raises(MapGeometryError):
        eng.swap_map("stats", [RateMapEntry()] * 128)
    with pytest.raises(MapGeometryError):
        eng.swap_map("algo", [b""] * 127)
    with pytest.raises(MapGeometryError):
        eng.swap_map("bogus", [])


def test_swap_map_returns_old_and_installs_new():
    eng = PolicyEngine()
    eng.write_rate_map(3, rate_to_entry(RateSpec(mcs=3)))
    old = eng.swap_map("rate", [RateMapEntry() for _ in range(128)])
    assert old[3].mcs == 3
    assert eng.rate_map[3].mcs == 0
    # writes after the swap land only in the new map
    eng.write_rate_map(3, rate_to_entry(RateSpec(mcs=7)))
    assert old[3].mcs == 3


def test_swap_map_concurrent_reader_sees_consistent_snapshots():
    """A reader iterating a grabbed map reference never observes a mix of
    old and new entries, no matter how many swaps happen meanwhile."""
    eng = PolicyEngine()
    generations = 50
    errors = []
    stop = threading.Event()

    def writer():
        for g in range(1, generations + 1):
            eng.swap_map("stats", [StatsEntry(tx_total=g) for _ in range(128)])
        stop.set()

    def reader():
        while not stop.is_set():
            snapshot = eng.stats_map  # grab the reference once
            values = {e.tx_total for e in snapshot}
            if len(values) != 1:
                errors.append(values)

    threads = [threading.Thread(target=reader) for _ in range(4)]
    for t in threads:
        t.start()
    writer_t = threading.Thread(target=writer)
    writer_t.start()
    writer_t.join()
    for t in threads:
        t.join()
    assert errors == []
    assert eng.stats_map[0].tx_total == generations


def test_map_bytes_full_and_single_slot():
    eng = PolicyEngine()
    eng.write_rate_map(2, rate_to_entry(RateSpec(mcs=5)))
    blob = eng.map_bytes("rate")
    assert len(blob) == 128 * RateMapEntry.SIZE
    slot = eng.map_bytes("rate", 2)
    assert slot == eng.rate_map[2].pack()
    assert blob[2 * 8:3 * 8] == slot
    assert len(eng.map_bytes("stats")) == 128 * StatsEntry.SIZE
    with pytest.raises(InvalidWcid):
        eng.map_bytes("rate", 200)
    with pytest.raises(MapGeometryError):
        eng.map_bytes("nope")


def test_rate_entry_round_trip_through_map_encoding():
    for mcs in range(8):
        spec = RateSpec(mcs=mcs, bandwidth=1, guard=1)
        assert entry_to_rate(rate_to_entry(spec)) == spec
    legacy = RateSpec(mcs=0, phy="legacy-OFDM")
    assert entry_to_rate(rate_to_entry(legacy)).phy == "legacy-OFDM"


def test_detach_program_clears_attachment():
    eng = PolicyEngine()
    eng.attach_program("p")
    eng.set_policy(ProgramPolicy("p"))
    eng.detach_program()
    assert eng.attached_program is None
    with pytest.raises(PolicyError):
        eng.set_policy(ProgramPolicy("p"))
