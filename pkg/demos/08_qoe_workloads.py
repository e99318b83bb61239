"""Score application workloads on a strong link versus a weak one.

Raw goodput hides what users feel. This demo runs a call, a streaming
session, and page loads over two very different links and reports the
metric each application actually cares about: mean-opinion scores for
voice and video, flow completion time for the page.
"""
from __future__ import annotations

from ratelab.controllers import FixedController, Iterate3Controller
from ratelab.engine import PolicyEngine
from ratelab.link import SimulatedLink
from ratelab.phy import ChannelModel, constant_trace
from ratelab.telemetry import TelemetryRing
from ratelab.workloads import WorkloadSpec, run_workload

SPECS = (
    WorkloadSpec.voip(duration_s=10.0),
    WorkloadSpec.video(segment_mb=0.9, segments=6),
    WorkloadSpec.web_page(page_kb=600, repeats=2),
)

LINKS = (
    ("strong, fixed MCS 7 (-55 dBm)", -55.0, lambda: FixedController(7)),
    ("weak, adaptive ladder (-78 dBm)", -78.0, lambda: Iterate3Controller()),
)


def main() -> None:
    print("Application-level quality on two links:\n")
    for label, rssi, make_controller in LINKS:
        print(f"  {label}")
        print("    workload         metric            value   goodput Mbps")
        for spec in SPECS:
            channel = ChannelModel(rssi_trace=constant_trace(rssi))
            link = SimulatedLink(channel, PolicyEngine(TelemetryRing()),
                                 controller=make_controller(), seed=8)
            res = run_workload(link, spec, deadline_s=120.0)
            extra = ""
            if spec.kind == "voip":
                extra = (f"   (loss {res.loss_fraction:.3f}, "
                         f"delay {res.mean_delay_ms:.1f} ms)")
            elif res.flow_fct_s:
                worst = max(res.flow_fct_s)
                extra = f"   (slowest flow {worst:.2f} s)"
            print(f"    {spec.kind:<16} {res.metric_name:<14} {res.metric:8.3f}"
                  f"   {res.goodput_mbps:8.2f}{extra}")
        print()

    print("  The weak link still completes everything, but the experience")
    print("  degrades unevenly: the call's small frames survive well, while")
    print("  page loads stretch with every extra millisecond of airtime.")


if __name__ == "__main__":
    main()
