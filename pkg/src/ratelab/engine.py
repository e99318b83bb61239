"""Policy dispatch engine: five rate-selection modes, shared per-station maps,
and batched statistics updates.

The engine mirrors a kernel-module design: a rate map (what the driver should
send), a stats map (aggregates flushed every 64 completions), and an opaque
algorithm-state map for programmable controllers. Rate-table pushes to the
driver are amortized through a global generation counter: a station's cached
rate is only refreshed when stale.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .phy import RateSpec, TxOutcome
from .records import (
    BW_HT20,
    GUARD_LONG,
    PHY_FLAG_HT,
    PHY_FLAG_LEGACY,
    RateMapEntry,
    StatsEntry,
    TxStatusContext,
)
from .telemetry import TelemetryRing, TelemetryScribe

MAX_STATIONS = 128
STATS_FLUSH_BATCH = 64
EWMA_SHIFT = 3  # alpha = 1/8 per flushed batch

FRAME_TYPES = ("mgmt", "ctrl", "data")


class EngineError(Exception):
    pass


class InvalidWcid(EngineError):
    pass


class PolicyError(EngineError):
    pass


class MapGeometryError(EngineError):
    pass


# --------------------------------------------------------------------------
# Policy modes


@dataclass(frozen=True)
class FixedPolicy:
    rate: RateSpec


@dataclass(frozen=True)
class PerStationPolicy:
    overrides: tuple[tuple[int, RateSpec], ...]
    default: RateSpec

    @classmethod
    def of(cls, overrides: dict[int, RateSpec], default: RateSpec) -> "PerStationPolicy":
        return cls(tuple(sorted(overrides.items())), default)

    def rate_for(self, wcid: int) -> RateSpec:
        for w, r in self.overrides:
            if w == wcid:
                return r
        return self.default


@dataclass(frozen=True)
class RoundRobinPolicy:
    rates: tuple[RateSpec, ...]
    frames_per_rate: int = 1

    def __post_init__(self):
        if not self.rates:
            raise PolicyError("round-robin needs at least one rate")
        if self.frames_per_rate < 1:
            raise PolicyError("frames_per_rate must be >= 1")


@dataclass(frozen=True)
class FrameTypePolicy:
    mgmt: RateSpec = RateSpec(mcs=0)
    ctrl: RateSpec = RateSpec(mcs=0)
    data: RateSpec = RateSpec(mcs=4)

    def rate_for(self, frame_type: str) -> RateSpec:
        return getattr(self, frame_type)


@dataclass(frozen=True)
class ProgramPolicy:
    """Rates come from the shared rate map, written by an attached program."""

    program_id: str = ""


PolicyMode = FixedPolicy | PerStationPolicy | RoundRobinPolicy | FrameTypePolicy | ProgramPolicy

DEFAULT_PROGRAM_RATE = RateSpec(mcs=0, bandwidth=BW_HT20, guard=GUARD_LONG)


def rate_to_entry(rate: RateSpec, valid: int = 1) -> RateMapEntry:
    return RateMapEntry(
        mcs=rate.mcs,
        streams=rate.streams,
        bandwidth=rate.bandwidth,
        guard=rate.guard,
        phy_mode=PHY_FLAG_HT if rate.is_ht() else PHY_FLAG_LEGACY,
        valid=valid,
    )


def entry_to_rate(entry: RateMapEntry) -> RateSpec:
    return RateSpec(
        mcs=entry.mcs,
        streams=entry.streams or 1,
        bandwidth=entry.bandwidth,
        guard=entry.guard,
        phy="HT" if entry.phy_mode & PHY_FLAG_HT else "legacy-OFDM",
    )


@dataclass
class _StationCache:
    rate: RateSpec | None = None
    generation: int = -1
    last_pushed_program_entry: bytes | None = None


@dataclass
class _PendingBatch:
    count: int = 0
    successes: int = 0
    retries: int = 0
    last_mcs: int = 0


@dataclass
class _LiveCounters:
    tx_total: int = 0
    tx_success: int = 0
    tx_retries: int = 0
    signal: int = 0
    ack_signal: int = 0


class PolicyEngine:
    """Rate policy engine for up to 128 stations (wcid 0 is reserved)."""

    def __init__(self, telemetry: TelemetryRing | None = None,
                 default_program_rate: RateSpec = DEFAULT_PROGRAM_RATE):
        self.telemetry = telemetry if telemetry is not None else TelemetryRing()
        self.default_program_rate = default_program_rate
        self.mode: PolicyMode = FixedPolicy(RateSpec(mcs=0))
        self.rate_generation = 0
        self.attached_program: str | None = None

        self.rate_map: list[RateMapEntry] = [RateMapEntry() for _ in range(MAX_STATIONS)]
        self.stats_map: list[StatsEntry] = [StatsEntry() for _ in range(MAX_STATIONS)]
        self.algo_map: list[bytes] = [b"" for _ in range(MAX_STATIONS)]

        self._cache: dict[int, _StationCache] = {}
        self._pending: dict[int, _PendingBatch] = {}
        self._live: dict[int, _LiveCounters] = {}
        self._rr_index = 0
        self._rr_frames = 0
        self.push_count = 0  # driver rate-table pushes (cache refreshes)

    # -- policy ------------------------------------------------------------

    def set_policy(self, mode: PolicyMode) -> None:
        """Install a policy mode and bump the global rate generation."""
        if isinstance(mode, ProgramPolicy) and self.attached_program is None:
            raise PolicyError("no-program-attached")
        if isinstance(mode, RoundRobinPolicy) and self._rr_index >= len(mode.rates):
            self._rr_index %= len(mode.rates)
        self.mode = mode
        self.rate_generation += 1

    def attach_program(self, program_id: str) -> None:
        self.attached_program = program_id

    def detach_program(self) -> None:
        self.attached_program = None

    # -- rate lookup ---------------------------------------------------------

    def _check_wcid(self, wcid: int) -> int:
        if not isinstance(wcid, int) or not 1 <= wcid < MAX_STATIONS:
            raise InvalidWcid(f"wcid must be in [1, {MAX_STATIONS - 1}]: {wcid!r}")
        return wcid

    def _compute_rate(self, wcid: int, frame_type: str) -> RateSpec:
        mode = self.mode
        if isinstance(mode, FixedPolicy):
            return mode.rate
        if isinstance(mode, PerStationPolicy):
            return mode.rate_for(wcid)
        if isinstance(mode, RoundRobinPolicy):
            rate = mode.rates[self._rr_index]
            self._rr_frames += 1
            if self._rr_frames >= mode.frames_per_rate:
                self._rr_frames = 0
                self._rr_index = (self._rr_index + 1) % len(mode.rates)
            return rate
        if isinstance(mode, FrameTypePolicy):
            return mode.rate_for(frame_type)
        entry = self.rate_map[wcid]
        if entry.valid:
            return entry_to_rate(entry)
        return self.default_program_rate

    def get_rate(self, wcid: int, frame_type: str = "data") -> RateSpec:
        """Resolve the transmit rate for one frame and refresh the station's
        cached rate table if it is stale."""
        self._check_wcid(wcid)
        if frame_type not in FRAME_TYPES:
            raise EngineError(f"unknown frame type: {frame_type!r}")
        rate = self._compute_rate(wcid, frame_type)

        ce = self._cache.setdefault(wcid, _StationCache())
        if ce.generation < self.rate_generation:
            ce.rate = rate
            ce.generation = self.rate_generation
            self.push_count += 1
            if isinstance(self.mode, ProgramPolicy):
                ce.last_pushed_program_entry = self.rate_map[wcid].pack()
        elif isinstance(self.mode, ProgramPolicy):
            packed = self.rate_map[wcid].pack()
            if packed != ce.last_pushed_program_entry:
                ce.rate = rate
                ce.last_pushed_program_entry = packed
                self.push_count += 1
        return rate

    # -- completions -----------------------------------------------------------

    def note_signal(self, wcid: int, signal_dbm: float, ack_signal_dbm: float | None = None) -> None:
        """Record the most recent received signal strength for a station."""
        self._check_wcid(wcid)
        live = self._live.setdefault(wcid, _LiveCounters())
        live.signal = round(signal_dbm)
        live.ack_signal = round(ack_signal_dbm if ack_signal_dbm is not None else signal_dbm)

    def on_tx_completion(
        self,
        wcid: int,
        outcome: TxOutcome,
        configured: RateSpec,
        frame_length: int,
        time_s: float,
        aggregate: bool = False,
    ) -> TxStatusContext:
        """Account one TX completion: update live counters, batch stats (flushed
        every 64 completions), append a telemetry entry, and build the
        controller context."""
        self._check_wcid(wcid)
        live = self._live.setdefault(wcid, _LiveCounters())
        live.tx_total += 1
        live.tx_success += 1 if outcome.success else 0
        live.tx_retries += outcome.retry_count

        batch = self._pending.setdefault(wcid, _PendingBatch())
        batch.count += 1
        batch.successes += 1 if outcome.success else 0
        batch.retries += outcome.retry_count
        batch.last_mcs = configured.mcs
        if batch.count >= STATS_FLUSH_BATCH:
            self._flush_stats(wcid, batch, live)
            self._pending[wcid] = _PendingBatch()

        self.telemetry.record(TelemetryScribe.build(
            timestamp_s=time_s,
            wcid=wcid,
            intended_mcs=configured.mcs,
            intended_flags=configured.flags,
            hw_mcs=outcome.hw_mcs_used,
            hw_flags=outcome.hw_rate_flags,
            retry_count=outcome.retry_count,
            success=outcome.success,
            rssi_dbm=live.signal,
            frame_length=frame_length,
            aggregate=aggregate,
        ))

        return TxStatusContext(
            wcid=wcid,
            success=1 if outcome.success else 0,
            mcs_used=configured.mcs,
            retry_count=outcome.retry_count,
            ewma_per=self.stats_map[wcid].ewma_per,
            tx_total=live.tx_total,
            tx_success=live.tx_success,
            tx_retries=live.tx_retries,
            signal=live.signal,
            ack_signal=live.ack_signal,
            frame_length=frame_length,
            timestamp_ns=int(time_s * 1e9),
            hw_mcs_used=outcome.hw_mcs_used,
            is_aggregate=1 if aggregate else 0,
            hw_rate_flags=outcome.hw_rate_flags,
        )

    def _flush_stats(self, wcid: int, batch: _PendingBatch, live: _LiveCounters) -> None:
        entry = self.stats_map[wcid]
        failures = batch.count - batch.successes
        batch_per_mille = failures * 1000 // batch.count
        entry.tx_total += batch.count
        entry.tx_success += batch.successes
        entry.tx_retries += batch.retries
        entry.ewma_per += (batch_per_mille - entry.ewma_per) >> EWMA_SHIFT
        entry.signal = live.signal
        entry.ack_signal = live.ack_signal
        entry.last_mcs = batch.last_mcs
        entry.flush_count += 1

    # -- shared maps ---------------------------------------------------------

    def write_rate_map(self, wcid: int, entry: RateMapEntry) -> None:
        """Store one rate-map slot. Does not bump the rate generation; Program
        mode picks the change up by value comparison on the next lookup."""
        if not isinstance(wcid, int) or not 0 <= wcid < MAX_STATIONS:
            raise InvalidWcid(f"rate map index out of range: {wcid!r}")
        entry.pack()  # validates field ranges
        self.rate_map[wcid] = entry

    def write_algo_state(self, wcid: int, blob: bytes) -> None:
        if not isinstance(wcid, int) or not 0 <= wcid < MAX_STATIONS:
            raise InvalidWcid(f"algo map index out of range: {wcid!r}")
        self.algo_map[wcid] = bytes(blob)

    def swap_map(self, which: str, new_map: list) -> list:
        """Atomically publish a replacement map and return the old one.

        Readers that grabbed the old list keep seeing a consistent snapshot;
        entry writes after the swap land in the new map only.
        """
        if which == "rate":
            self._check_geometry(new_map, RateMapEntry)
            old, self.rate_map = self.rate_map, list(new_map)
        elif which == "stats":
            self._check_geometry(new_map, StatsEntry)
            old, self.stats_map = self.stats_map, list(new_map)
        elif which == "algo":
            if len(new_map) != MAX_STATIONS or not all(isinstance(b, (bytes, bytearray)) for b in new_map):
                raise MapGeometryError(f"algo map needs {MAX_STATIONS} byte blobs")
            old, self.algo_map = self.algo_map, [bytes(b) for b in new_map]
        else:
            raise MapGeometryError(f"unknown map: {which!r}")
        return old

    @staticmethod
    def _check_geometry(new_map: list, record_type) -> None:
        if len(new_map) != MAX_STATIONS:
            raise MapGeometryError(f"map needs {MAX_STATIONS} entries, got {len(new_map)}")
        for e in new_map:
            if not isinstance(e, record_type):
                raise MapGeometryError(f"map entries must be {record_type.__name__}")

    def map_bytes(self, which: str, wcid: int | None = None) -> bytes:
        """Packed map contents, for control-plane reads."""
        if which == "rate":
            items = [e.pack() for e in self.rate_map]
        elif which == "stats":
            items = [e.pack() for e in self.stats_map]
        elif which == "algo":
            items = list(self.algo_map)
        else:
            raise MapGeometryError(f"unknown map: {which!r}")
        if wcid is not None:
            if not 0 <= wcid < MAX_STATIONS:
                raise InvalidWcid(f"map index out of range: {wcid!r}")
            return items[wcid]
        return b"".join(items)
