"""Per-frame telemetry: a fixed-capacity overwrite-oldest ring plus aggregation.

Head and tail are absolute (monotonic) counters, not wrapped indices; the ring
holds the window [tail, head). A burst faster than the consumer simply drops
the oldest entries by dragging tail forward.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .records import OUTCOME_AGGREGATE, OUTCOME_SUCCESS, PHY_FLAG_HT, TelemetryEntry

RING_CAPACITY = 4096


class TelemetryRing:
    """Overwrite-oldest telemetry ring with absolute head/tail counters."""

    def __init__(self, capacity: int = RING_CAPACITY):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._slots: list[TelemetryEntry | None] = [None] * capacity
        self.head = 0  # absolute count of records ever written
        self.tail = 0  # absolute index of oldest unread entry

    def __len__(self) -> int:
        return self.head - self.tail

    def record(self, entry: TelemetryEntry) -> TelemetryEntry:
        """Append one entry. The ring assigns seq from its monotonic counter."""
        entry.seq = self.head & 0xFFFFFFFF
        self._slots[self.head % self.capacity] = entry
        self.head += 1
        if self.head - self.tail > self.capacity:
            self.tail = self.head - self.capacity
        return entry

    def snapshot_read(self) -> list[TelemetryEntry]:
        """Drain [tail, head) in order and advance tail to head.

        The copy is taken in at most two contiguous segments of the backing
        store (the window may wrap the physical buffer once).
        """
        n = self.head - self.tail
        if n == 0:
            return []
        start = self.tail % self.capacity
        first = min(n, self.capacity - start)
        out = self._slots[start:start + first]
        if n > first:
            out = out + self._slots[: n - first]
        self.tail = self.head
        return out  # type: ignore[return-value]


def aggregate_stats(entries: list[TelemetryEntry]) -> dict[int, dict]:
    """Summarize telemetry entries per station.

    hw_fallback_fraction is the share of successful frames delivered at a
    rate other than the intended one (lower MCS or a legacy-flagged rate).
    """
    out: dict[int, dict] = {}
    by_wcid: dict[int, list[TelemetryEntry]] = {}
    for e in entries:
        by_wcid.setdefault(e.wcid, []).append(e)
    for wcid, group in sorted(by_wcid.items()):
        frames = len(group)
        successes = [e for e in group if e.outcome_flags & OUTCOME_SUCCESS]
        hist = Counter(e.retry_count for e in group)
        fallback = [
            e for e in successes
            if e.hw_mcs != e.intended_mcs or (e.intended_flags & PHY_FLAG_HT and not e.hw_flags & PHY_FLAG_HT)
        ]
        out[wcid] = {
            "frames": frames,
            "delivery_ratio": len(successes) / frames,
            "retry_histogram": dict(sorted(hist.items())),
            "mean_rssi": sum(e.rssi for e in group) / frames,
            "hw_fallback_fraction": (len(fallback) / len(successes)) if successes else 0.0,
        }
    return out


@dataclass
class TelemetryScribe:
    """Helper that builds well-clamped TelemetryEntry values from raw fields."""

    @staticmethod
    def build(
        timestamp_s: float,
        wcid: int,
        intended_mcs: int,
        intended_flags: int,
        hw_mcs: int,
        hw_flags: int,
        retry_count: int,
        success: bool,
        rssi_dbm: float,
        frame_length: int,
        aggregate: bool = False,
    ) -> TelemetryEntry:
        flags = (OUTCOME_SUCCESS if success else 0) | (OUTCOME_AGGREGATE if aggregate else 0)
        return TelemetryEntry(
            seq=0,
            timestamp_us=int(timestamp_s * 1e6) & 0xFFFFFFFF,
            wcid=wcid,
            intended_mcs=intended_mcs,
            intended_flags=intended_flags,
            hw_mcs=hw_mcs,
            hw_flags=hw_flags,
            retry_count=min(retry_count, 255),
            outcome_flags=flags,
            rssi=max(-128, min(127, round(rssi_dbm))),
            frame_length=min(frame_length, 0xFFFF),
            reserved=0,
        )
