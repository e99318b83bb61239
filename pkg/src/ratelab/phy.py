"""Simulated 802.11n PHY: rate tables, a logistic channel model, and the
firmware transmit path with retry and cross-PHY rate fallback.

Rates cover HT MCS 0-7 on a single spatial stream plus legacy OFDM for the
terminal fallback rung. Delivery is Bernoulli per attempt with probability
given by a logistic curve in RSSI around a per-MCS threshold.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .records import BW_HT20, BW_HT40, GUARD_LONG, GUARD_SHORT, PHY_FLAG_HT, PHY_FLAG_LEGACY

MCS_COUNT = 8

# Single-stream HT data rates in kbps, indexed by MCS, keyed by (bandwidth, guard).
HT_RATE_KBPS = {
    (BW_HT20, GUARD_LONG): (6500, 13000, 19500, 26000, 39000, 52000, 58500, 65000),
    (BW_HT20, GUARD_SHORT): (7200, 14400, 21700, 28900, 43300, 57800, 65000, 72200),
    (BW_HT40, GUARD_LONG): (13500, 27000, 40500, 54000, 81000, 108000, 121500, 135000),
    (BW_HT40, GUARD_SHORT): (15000, 30000, 45000, 60000, 90000, 120000, 135000, 150000),
}

# Legacy OFDM rates in kbps; the fallback ladder terminates at index 0 (6 Mbps).
LEGACY_RATE_KBPS = (6000, 9000, 12000, 18000, 24000, 36000, 48000, 54000)

DEFAULT_FRAME_OVERHEAD_US = 50.0
DEFAULT_RETRY_LIMIT = 3


def check_mcs(mcs: int) -> int:
    if not isinstance(mcs, int) or not 0 <= mcs < MCS_COUNT:
        raise ValueError(f"mcs must be an integer in [0, {MCS_COUNT - 1}]: {mcs!r}")
    return mcs


@dataclass(frozen=True)
class RateSpec:
    """A transmit rate: MCS index plus PHY qualifiers."""

    mcs: int = 0
    streams: int = 1
    bandwidth: int = BW_HT20
    guard: int = GUARD_LONG
    phy: str = "HT"  # "HT" or "legacy-OFDM"

    def __post_init__(self):
        check_mcs(self.mcs)
        if self.streams != 1:
            raise ValueError("only single-stream rates are modeled")
        if self.bandwidth not in (BW_HT20, BW_HT40):
            raise ValueError(f"bad bandwidth code: {self.bandwidth}")
        if self.guard not in (GUARD_LONG, GUARD_SHORT):
            raise ValueError(f"bad guard code: {self.guard}")
        if self.phy not in ("HT", "legacy-OFDM"):
            raise ValueError(f"bad phy: {self.phy!r}")

    @property
    def flags(self) -> int:
        return PHY_FLAG_HT if self.phy == "HT" else PHY_FLAG_LEGACY

    def is_ht(self) -> bool:
        return self.phy == "HT"


LEGACY_6M = RateSpec(mcs=0, phy="legacy-OFDM")


def phy_rate_kbps(spec: RateSpec) -> int:
    """Nominal PHY data rate for a rate spec, in kbps."""
    if spec.is_ht():
        return HT_RATE_KBPS[(spec.bandwidth, spec.guard)][spec.mcs]
    return LEGACY_RATE_KBPS[spec.mcs]


def airtime_us(spec: RateSpec, frame_bytes: int, overhead_us: float = DEFAULT_FRAME_OVERHEAD_US) -> float:
    """Airtime of one attempt: fixed per-frame overhead plus payload serialization."""
    bits = frame_bytes * 8
    return overhead_us + bits * 1000.0 / phy_rate_kbps(spec)


@dataclass
class TxOutcome:
    """What the hardware reports after a frame (including any fallback)."""

    success: bool
    retry_count: int
    hw_mcs_used: int
    hw_rate_flags: int
    airtime_us: float


def default_thresholds(base_dbm: float = -88.0, step_db: float = 2.5) -> tuple[float, ...]:
    """Per-MCS RSSI midpoints: base + step * mcs, strictly increasing."""
    return tuple(base_dbm + step_db * m for m in range(MCS_COUNT))


@dataclass
class ChannelModel:
    """Logistic delivery-probability channel with a time-varying RSSI trace.

    thresholds[mcs] is the RSSI at which delivery probability is 0.5 for that
    MCS; width sets the slope. Legacy OFDM attempts use thresholds[0] minus
    legacy_margin_db, making the 6 Mbps rung the most robust rate.
    """

    thresholds: tuple[float, ...] = field(default_factory=default_thresholds)
    width: float = 2.0
    rssi_trace: Callable[[float], float] = None
    seed: int = 0
    legacy_margin_db: float = 3.0

    def __post_init__(self):
        if len(self.thresholds) != MCS_COUNT:
            raise ValueError(f"need {MCS_COUNT} thresholds, got {len(self.thresholds)}")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.rssi_trace is None:
            self.rssi_trace = constant_trace(-60.0)

    def rssi_at(self, t: float) -> float:
        return self.rssi_trace(t)

    def attempt_success_probability(self, spec: RateSpec, rssi: float) -> float:
        if spec.is_ht():
            mid = self.thresholds[spec.mcs]
        else:
            mid = self.thresholds[0] - self.legacy_margin_db
        return 1.0 / (1.0 + math.exp(-(rssi - mid) / self.width))


def success_probability(model: ChannelModel, mcs: int, rssi: float) -> float:
    """Per-attempt delivery probability of an HT rate at a given RSSI."""
    check_mcs(mcs)
    return model.attempt_success_probability(RateSpec(mcs=mcs), rssi)


def default_fallback_ladder(configured: RateSpec) -> list[RateSpec]:
    """Hardware fallback ladder: the configured rung, up to two HT rungs below,
    then legacy 6 Mbps OFDM."""
    ladder = [configured]
    if configured.is_ht():
        for down in (1, 2):
            m = configured.mcs - down
            if m >= 0:
                ladder.append(RateSpec(mcs=m, streams=configured.streams,
                                       bandwidth=configured.bandwidth,
                                       guard=configured.guard))
    ladder.append(LEGACY_6M)
    return ladder


def transmit_frame(
    model: ChannelModel,
    time_s: float,
    configured: RateSpec,
    retry_limit: int,
    fallback_ladder: Sequence[RateSpec],
    rng: random.Random,
    frame_bytes: int = 1500,
    overhead_us: float = DEFAULT_FRAME_OVERHEAD_US,
) -> TxOutcome:
    """Transmit one frame the way firmware would.

    The configured rate (fallback_ladder[0]) is attempted retry_limit+1 times;
    each later rung gets a single attempt. retry_count counts every attempt
    after the first. Airtime accumulates over all attempts actually made.
    """
    if not fallback_ladder:
        raise ValueError("fallback ladder must not be empty")
    if fallback_ladder[0] != configured:
        raise ValueError("fallback_ladder[0] must be the configured rate")
    if retry_limit < 0:
        raise ValueError("retry_limit must be >= 0")

    rssi = model.rssi_at(time_s)
    attempts: list[RateSpec] = [configured] * (retry_limit + 1)
    attempts.extend(fallback_ladder[1:])

    total_airtime = 0.0
    made = 0
    for spec in attempts:
        made += 1
        total_airtime += airtime_us(spec, frame_bytes, overhead_us)
        p = model.attempt_success_probability(spec, rssi)
        if rng.random() < p:
            return TxOutcome(
                success=True,
                retry_count=made - 1,
                hw_mcs_used=spec.mcs,
                hw_rate_flags=spec.flags,
                airtime_us=total_airtime,
            )
    last = attempts[-1]
    return TxOutcome(
        success=False,
        retry_count=made - 1,
        hw_mcs_used=last.mcs,
        hw_rate_flags=last.flags,
        airtime_us=total_airtime,
    )


def expected_goodput_bps(
    model: ChannelModel,
    configured: RateSpec,
    rssi: float,
    retry_limit: int = DEFAULT_RETRY_LIMIT,
    frame_bytes: int = 1500,
    overhead_us: float = DEFAULT_FRAME_OVERHEAD_US,
    fallback_ladder: Sequence[RateSpec] | None = None,
) -> float:
    """Closed-form expected goodput of the transmit path at a fixed RSSI.

    Enumerates the finite attempt sequence: goodput = payload_bits *
    P(delivered) / E[airtime], the renewal-reward rate of the retry process.
    """
    ladder = list(fallback_ladder) if fallback_ladder is not None else default_fallback_ladder(configured)
    attempts = [ladder[0]] * (retry_limit + 1) + list(ladder[1:])
    bits = frame_bytes * 8
    p_reach = 1.0
    e_airtime = 0.0
    p_deliver = 0.0
    for spec in attempts:
        at = airtime_us(spec, frame_bytes, overhead_us)
        e_airtime += p_reach * at
        p = model.attempt_success_probability(spec, rssi)
        p_deliver += p_reach * p
        p_reach *= 1.0 - p
    if e_airtime == 0.0:
        return 0.0
    return bits * p_deliver / (e_airtime * 1e-6)


def oracle_best_mcs(model: ChannelModel, rssi: float) -> int:
    """Brute-force oracle: argmax over MCS of phy_rate * p(mcs, rssi).

    Ties break toward the lower MCS.
    """
    best, best_score = 0, -1.0
    for m in range(MCS_COUNT):
        score = HT_RATE_KBPS[(BW_HT20, GUARD_LONG)][m] * success_probability(model, m, rssi)
        if score > best_score:
            best, best_score = m, score
    return best


# ---------------------------------------------------------------------------
# RSSI traces. Each factory returns a pure function of time so that paired
# experiment arms replaying the same trace see identical channels.


def constant_trace(level_dbm: float) -> Callable[[float], float]:
    return lambda t: level_dbm


def linear_trace(start_dbm: float, slope_db_per_s: float) -> Callable[[float], float]:
    return lambda t: start_dbm + slope_db_per_s * t


def sinusoid_trace(mean_dbm: float, amplitude_db: float, period_s: float) -> Callable[[float], float]:
    if period_s <= 0:
        raise ValueError("period must be positive")
    w = 2.0 * math.pi / period_s

    def trace(t: float) -> float:
        return mean_dbm + amplitude_db * math.sin(w * t)

    return trace


def random_walk_trace(
    seed: int,
    start_dbm: float = -70.0,
    sigma_db: float = 0.5,
    dt_s: float = 0.05,
    duration_s: float = 600.0,
    drift_db_per_s: float = 0.0,
    interference_rate_per_s: float = 0.0,
    interference_depth_db: float = 12.0,
    interference_duration_s: float = 0.5,
) -> Callable[[float], float]:
    """Seeded random walk sampled on a fixed grid, with optional step
    interference events (sudden RSSI drops of fixed depth and duration).

    The walk is precomputed from the seed, so the returned trace is a pure
    function of time; beyond duration_s it holds the last value.
    """
    rng = random.Random(seed)
    steps = int(duration_s / dt_s) + 2
    levels = [start_dbm]
    for _ in range(steps):
        levels.append(levels[-1] + rng.gauss(0.0, sigma_db))

    events: list[tuple[float, float]] = []
    if interference_rate_per_s > 0:
        t = 0.0
        while True:
            t += rng.expovariate(interference_rate_per_s)
            if t >= duration_s:
                break
            events.append((t, t + interference_duration_s))

    def trace(t: float) -> float:
        t_eff = min(max(t, 0.0), duration_s)
        idx = int(t_eff / dt_s)
        if idx >= len(levels):
            idx = len(levels) - 1
        v = levels[idx] + drift_db_per_s * t_eff
        if any(t0 <= t < t1 for t0, t1 in events):
            v -= interference_depth_db
        return v

    return trace
