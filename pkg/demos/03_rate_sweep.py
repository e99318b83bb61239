"""Sweep every MCS on a fixed channel and find the goodput knee.

A round-robin sweep sends equal frames at each rate. Delivery stays near
1.0 even past the knee — failed attempts fall back down a hardware ladder
that ends at a very robust legacy rate — but the airtime those fallbacks
burn makes goodput collapse instead. The best rate is the one maximizing
expected goodput, which an exhaustive per-rate calculation confirms.
"""
from __future__ import annotations

from ratelab.engine import PolicyEngine
from ratelab.harness import sweep_all_rates
from ratelab.link import SimulatedLink
from ratelab.phy import ChannelModel, RateSpec, constant_trace, expected_goodput_bps
from ratelab.telemetry import TelemetryRing

RSSI_DBM = -76.0


def main() -> None:
    channel = ChannelModel(rssi_trace=constant_trace(RSSI_DBM))
    link = SimulatedLink(channel, PolicyEngine(TelemetryRing()), seed=11)
    table = sweep_all_rates(link, frames_per_rate=64, cycles=12)

    oracle = max(range(8), key=lambda m: expected_goodput_bps(
        channel, RateSpec(mcs=m), RSSI_DBM))
    measured_best = max(table, key=lambda m: table[m]["goodput_mbps"])

    print(f"Rate sweep at a constant {RSSI_DBM:.0f} dBm "
          f"(64 frames/rate x 12 cycles):\n")
    print("  MCS  phy Mbps  delivery  goodput Mbps")
    for mcs in range(8):
        row = table[mcs]
        marker = "  <- knee" if mcs == measured_best else ""
        print(f"   {mcs}    {row['phy_rate_mbps']:6.1f}    {row['delivery_ratio']:.3f}"
              f"    {row['goodput_mbps']:8.2f}{marker}")

    print(f"\n  measured argmax: MCS {measured_best}; "
          f"analytic argmax: MCS {oracle}")
    print("  Delivery barely moves above the knee, but goodput falls off a")
    print("  cliff: every high-rate frame still arrives, after burning its")
    print("  retries and walking the fallback ladder.")


if __name__ == "__main__":
    main()
