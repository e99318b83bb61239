"""Fixed-layout binary records shared between the engine, telemetry and controllers.

All records are packed little-endian. Sizes are part of the wire contract:
RateMapEntry 8 bytes, StatsEntry 48 bytes, TelemetryEntry 20 bytes,
TxStatusContext 120 bytes, AlgoState 12 bytes.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, fields

MASK64 = (1 << 64) - 1

# phy_mode / rate-flags byte values: hardware reports 0x08 for HT frames and
# 0x00 for legacy OFDM.
PHY_FLAG_HT = 0x08
PHY_FLAG_LEGACY = 0x00

# bandwidth / guard-interval byte codes used inside packed records
BW_HT20 = 0
BW_HT40 = 1
GUARD_LONG = 0
GUARD_SHORT = 1

OUTCOME_SUCCESS = 0x01
OUTCOME_AGGREGATE = 0x02


def _check_u(value: int, bits: int, name: str) -> int:
    if not 0 <= value < (1 << bits):
        raise ValueError(f"{name} out of range for u{bits}: {value}")
    return value


def _check_i(value: int, bits: int, name: str) -> int:
    lo = -(1 << (bits - 1))
    if not lo <= value < (1 << (bits - 1)):
        raise ValueError(f"{name} out of range for i{bits}: {value}")
    return value


@dataclass
class RateMapEntry:
    """One slot of the shared rate map: the rate the driver should use."""

    mcs: int = 0
    streams: int = 1
    bandwidth: int = BW_HT20
    guard: int = GUARD_LONG
    phy_mode: int = PHY_FLAG_HT
    valid: int = 0

    _struct = struct.Struct("<6B2x")
    SIZE = 8

    def pack(self) -> bytes:
        return self._struct.pack(
            _check_u(self.mcs, 8, "mcs"),
            _check_u(self.streams, 8, "streams"),
            _check_u(self.bandwidth, 8, "bandwidth"),
            _check_u(self.guard, 8, "guard"),
            _check_u(self.phy_mode, 8, "phy_mode"),
            _check_u(self.valid, 8, "valid"),
        )

    @classmethod
    def unpack(cls, buf: bytes) -> "RateMapEntry":
        return cls(*cls._struct.unpack(buf))


@dataclass
class StatsEntry:
    """Per-station aggregate TX statistics, flushed in 64-completion batches."""

    tx_total: int = 0
    tx_success: int = 0
    tx_retries: int = 0
    ewma_per: int = 0  # packet error rate, per-mille
    signal: int = 0
    ack_signal: int = 0
    last_mcs: int = 0
    flush_count: int = 0

    _struct = struct.Struct("<3QIiiII4x")
    SIZE = 48

    def pack(self) -> bytes:
        return self._struct.pack(
            _check_u(self.tx_total, 64, "tx_total"),
            _check_u(self.tx_success, 64, "tx_success"),
            _check_u(self.tx_retries, 64, "tx_retries"),
            _check_u(self.ewma_per, 32, "ewma_per"),
            _check_i(self.signal, 32, "signal"),
            _check_i(self.ack_signal, 32, "ack_signal"),
            _check_u(self.last_mcs, 32, "last_mcs"),
            _check_u(self.flush_count, 32, "flush_count"),
        )

    @classmethod
    def unpack(cls, buf: bytes) -> "StatsEntry":
        return cls(*cls._struct.unpack(buf))


@dataclass
class TelemetryEntry:
    """One per-frame telemetry ring record (20 bytes packed)."""

    seq: int = 0
    timestamp_us: int = 0  # wraps at 2**32 microseconds
    wcid: int = 0
    intended_mcs: int = 0
    intended_flags: int = 0
    hw_mcs: int = 0
    hw_flags: int = 0
    retry_count: int = 0
    outcome_flags: int = 0  # bit0 success, bit1 aggregate
    rssi: int = 0  # dBm, i8
    frame_length: int = 0
    reserved: int = 0

    _struct = struct.Struct("<II7Bb2H")
    SIZE = 20

    def pack(self) -> bytes:
        return self._struct.pack(
            _check_u(self.seq, 32, "seq"),
            _check_u(self.timestamp_us, 32, "timestamp_us"),
            _check_u(self.wcid, 8, "wcid"),
            _check_u(self.intended_mcs, 8, "intended_mcs"),
            _check_u(self.intended_flags, 8, "intended_flags"),
            _check_u(self.hw_mcs, 8, "hw_mcs"),
            _check_u(self.hw_flags, 8, "hw_flags"),
            _check_u(self.retry_count, 8, "retry_count"),
            _check_u(self.outcome_flags, 8, "outcome_flags"),
            _check_i(self.rssi, 8, "rssi"),
            _check_u(self.frame_length, 16, "frame_length"),
            _check_u(self.reserved, 16, "reserved"),
        )

    @classmethod
    def unpack(cls, buf: bytes) -> "TelemetryEntry":
        return cls(*cls._struct.unpack(buf))

    @property
    def success(self) -> bool:
        return bool(self.outcome_flags & OUTCOME_SUCCESS)

    def to_json_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# TxStatusContext field names, in wire order. signal and ack_signal are signed.
CTX_FIELDS = (
    "wcid",
    "success",
    "mcs_used",
    "retry_count",
    "ewma_per",
    "tx_total",
    "tx_success",
    "tx_retries",
    "signal",
    "ack_signal",
    "frame_length",
    "timestamp_ns",
    "hw_mcs_used",
    "is_aggregate",
    "hw_rate_flags",
)


@dataclass
class TxStatusContext:
    """Per-completion context handed to rate controllers (15 u64 slots, 120 bytes)."""

    wcid: int = 0
    success: int = 0
    mcs_used: int = 0
    retry_count: int = 0
    ewma_per: int = 0
    tx_total: int = 0
    tx_success: int = 0
    tx_retries: int = 0
    signal: int = 0
    ack_signal: int = 0
    frame_length: int = 0
    timestamp_ns: int = 0
    hw_mcs_used: int = 0
    is_aggregate: int = 0
    hw_rate_flags: int = 0

    _struct = struct.Struct("<8Q2q5Q")
    SIZE = 120

    def pack(self) -> bytes:
        vals = []
        for name in CTX_FIELDS:
            v = getattr(self, name)
            if name in ("signal", "ack_signal"):
                vals.append(_check_i(v, 64, name))
            else:
                vals.append(_check_u(v, 64, name))
        return self._struct.pack(*vals)

    @classmethod
    def unpack(cls, buf: bytes) -> "TxStatusContext":
        return cls(*cls._struct.unpack(buf))

    def as_u64_slots(self) -> tuple[int, ...]:
        """All fields as raw u64 values (signed fields in two's complement)."""
        return tuple(getattr(self, n) & MASK64 for n in CTX_FIELDS)


@dataclass
class AlgoState:
    """Packed per-station controller state blob (12 bytes)."""

    current_mcs: int = 0
    last_good_mcs: int = 0
    recent_ok: int = 0
    promote_streak: int = 0
    mcs5_cooldown: int = 0
    outage_guard: int = 0
    low_ok_streak: int = 0
    pad: int = 0
    frame_count: int = 0

    _struct = struct.Struct("<8BI")
    SIZE = 12

    def pack(self) -> bytes:
        return self._struct.pack(
            _check_u(self.current_mcs, 8, "current_mcs"),
            _check_u(self.last_good_mcs, 8, "last_good_mcs"),
            _check_u(self.recent_ok, 8, "recent_ok"),
            _check_u(self.promote_streak, 8, "promote_streak"),
            _check_u(self.mcs5_cooldown, 8, "mcs5_cooldown"),
            _check_u(self.outage_guard, 8, "outage_guard"),
            _check_u(self.low_ok_streak, 8, "low_ok_streak"),
            _check_u(self.pad, 8, "pad"),
            _check_u(self.frame_count, 32, "frame_count"),
        )

    @classmethod
    def unpack(cls, buf: bytes) -> "AlgoState":
        return cls(*cls._struct.unpack(buf))
