"""Walk the shipped rate controller through its three defensive mechanisms.

The controller never transmits below MCS 3, demands a streak of clean
frames before promoting to MCS 5, and remembers trouble two ways: a
cooldown that suppresses MCS 5 after retry inflation, and a near-outage
guard that pins MCS 3 for ten frames after a failure at MCS 4+.
"""
from __future__ import annotations

from collections import Counter

from ratelab.controllers import Iterate3Controller, fresh_algo_state, iterate3_step
from ratelab.engine import PolicyEngine
from ratelab.link import SimulatedLink
from ratelab.phy import ChannelModel, constant_trace
from ratelab.records import AlgoState, TxStatusContext
from ratelab.telemetry import TelemetryRing


def ctx(**kw) -> TxStatusContext:
    kw.setdefault("wcid", 1)
    return TxStatusContext(**kw)


def show(tag: str, state: AlgoState, chosen: int) -> None:
    print(f"  {tag:<34} -> MCS {chosen}  "
          f"(last_good={state.last_good_mcs} streak={state.promote_streak} "
          f"cooldown={state.mcs5_cooldown} guard={state.outage_guard} "
          f"low_ok={state.low_ok_streak})")


def promotion_story() -> None:
    print("1. Promotion demands four clean frames at MCS 4 (gates already clear):")
    state = fresh_algo_state(pre_satisfied_gate=True)
    mcs = 4
    for i in range(5):
        state, mcs = iterate3_step(state, ctx(success=1, mcs_used=mcs, retry_count=0))
        show(f"clean frame {i + 1}", state, mcs)


def retry_story() -> None:
    print("\n2. A single retry at MCS 5 arms the short cooldown and drops the floor:")
    state = AlgoState(current_mcs=5, last_good_mcs=5, low_ok_streak=3)
    state, chosen = iterate3_step(state, ctx(success=1, mcs_used=5, retry_count=1))
    show("delivered, but with one retry", state, chosen)
    print("   ...and three retries anywhere is an emergency drop:")
    state, chosen = iterate3_step(state, ctx(success=1, mcs_used=4, retry_count=3))
    show("delivered after three retries", state, chosen)


def outage_story() -> None:
    print("\n3. A failure at MCS 5 arms the ten-frame outage guard:")
    state = AlgoState(current_mcs=5, last_good_mcs=5, low_ok_streak=3)
    state, chosen = iterate3_step(state, ctx(success=0, mcs_used=5, retry_count=1))
    show("hard failure at MCS 5", state, chosen)
    print("   Clean low-rate frames drain it one per frame; the exit streak")
    print("   must also rebuild before anything above the floor is allowed:")
    for i in range(10):
        state, chosen = iterate3_step(state, ctx(success=1, mcs_used=3, retry_count=0))
        if i in (0, 4, 9):
            show(f"clean frame {i + 1} at MCS 3", state, chosen)


def closed_loop_story() -> None:
    print("\n4. Closed loop over a simulated link (2000 frames each):")
    for rssi in (-60.0, -78.0):
        channel = ChannelModel(rssi_trace=constant_trace(rssi))
        link = SimulatedLink(channel, PolicyEngine(TelemetryRing()),
                             Iterate3Controller(pre_satisfied_gate=True), seed=1)
        used: Counter[int] = Counter()
        for _ in range(2000):
            _, c = link.send_frame()
            used[c.mcs_used] += 1
        histogram = ", ".join(f"MCS {m}: {n}" for m, n in sorted(used.items()))
        print(f"  {rssi:.0f} dBm: {histogram}")
    print("  On the strong channel the controller camps between MCS 4 and 5;")
    print("  on the weak one the blemish machinery keeps it at the MCS 3 floor.")


if __name__ == "__main__":
    promotion_story()
    retry_story()
    outage_story()
    closed_loop_story()
