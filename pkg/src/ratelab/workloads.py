"""Application workloads over a simulated link, and the QoE models that score
them.

Five patterns: saturating peak throughput, bulk file download, web page
fetches, paced VoIP, and segmented video. Bulk patterns are closed-loop and
reliable (a failed frame is retransmitted); VoIP is open-loop with a
tail-drop FIFO and per-packet loss. Sizes use decimal units (1 MB = 1e6
bytes) and goodput is reported in decimal megabits per second.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .link import SimulatedLink

MOS_MIN = 1.0
MOS_MAX = 4.5


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    duration_s: float = 0.0
    burst_bytes: int = 0
    repeats: int = 1
    packet_bytes: int = 0
    packet_interval_s: float = 0.0
    segment_bytes: int = 0
    segment_count: int = 0
    segment_play_s: float = 3.5

    @staticmethod
    def peak_throughput(duration_s: float = 10.0) -> "WorkloadSpec":
        return WorkloadSpec(kind="peak-throughput", duration_s=duration_s)

    @staticmethod
    def file_download(burst_mb: float = 25.0, repeats: int = 3) -> "WorkloadSpec":
        return WorkloadSpec(kind="file-download",
                            burst_bytes=int(burst_mb * 1e6), repeats=repeats)

    @staticmethod
    def web_page(page_kb: float = 1246.0, repeats: int = 3) -> "WorkloadSpec":
        return WorkloadSpec(kind="web-page",
                            burst_bytes=int(page_kb * 1e3), repeats=repeats)

    @staticmethod
    def voip(packet_bytes: int = 160, interval_s: float = 0.020,
             duration_s: float = 30.0) -> "WorkloadSpec":
        return WorkloadSpec(kind="voip", packet_bytes=packet_bytes,
                            packet_interval_s=interval_s, duration_s=duration_s)

    @staticmethod
    def video(segment_mb: float = 1.8, segments: int = 10,
              play_s: float = 3.5) -> "WorkloadSpec":
        return WorkloadSpec(kind="video", segment_bytes=int(segment_mb * 1e6),
                            segment_count=segments, segment_play_s=play_s)

    @staticmethod
    def of_kind(kind: str, **kwargs) -> "WorkloadSpec":
        factory = {
            "peak-throughput": WorkloadSpec.peak_throughput,
            "file-download": WorkloadSpec.file_download,
            "web-page": WorkloadSpec.web_page,
            "voip": WorkloadSpec.voip,
            "video": WorkloadSpec.video,
        }.get(kind)
        if factory is None:
            raise ValueError(f"unknown workload kind: {kind!r}")
        return factory(**kwargs)


@dataclass
class FrameRecord:
    enqueue_s: float
    complete_s: float  # math.inf when never delivered
    payload_bytes: int
    delivered: bool
    flow: int


@dataclass
class QoEResult:
    kind: str
    metric_name: str
    metric: float
    goodput_mbps: float = 0.0
    flow_fct_s: list[float] = field(default_factory=list)
    censored_flows: int = 0
    loss_fraction: float = 0.0
    mean_delay_ms: float = 0.0
    jitter_ms: float = 0.0
    fetch_times_s: list[float] = field(default_factory=list)
    mos: float | None = None
    frames_sent: int = 0
    frames_delivered: int = 0
    elapsed_s: float = 0.0

    def to_json_dict(self) -> dict:
        d = dict(self.__dict__)
        d["flow_fct_s"] = [None if math.isinf(v) else v for v in self.flow_fct_s]
        return d


# ---------------------------------------------------------------------------
# QoE models


def voip_mos(loss_fraction: float, mean_delay_ms: float, jitter_ms: float) -> float:
    """Narrowband E-model, simplified: mouth-to-ear delay is the mean one-way
    delay plus twice the jitter; R = 93.2 - Id - Ie_eff; piecewise cubic map
    to MOS (the cubic applies only on 0 < R < 100; outside that range the
    score saturates, keeping MOS nonincreasing in every impairment), clamped
    to [1.0, 4.5]."""
    d = mean_delay_ms + 2.0 * jitter_ms
    delay_impairment = 0.024 * d + (0.11 * (d - 177.3) if d > 177.3 else 0.0)
    ppl = 100.0 * loss_fraction
    equipment_impairment = 95.0 * ppl / (ppl + 4.3)
    r = 93.2 - delay_impairment - equipment_impairment
    if r <= 0.0:
        return MOS_MIN
    if r >= 100.0:
        return MOS_MAX
    mos = 1.0 + 0.035 * r + 7e-6 * r * (r - 60.0) * (100.0 - r)
    return max(MOS_MIN, min(MOS_MAX, mos))


def video_mos(fetch_times_s: list[float], play_s: float = 3.5) -> float:
    """Exponential stall model: each segment holds play_s seconds of content;
    fetch time beyond that stalls playback. MOS = 1 + 3.5 * exp(-4 * stall
    ratio), clamped to [1.0, 4.5]."""
    if not fetch_times_s:
        return MOS_MIN
    stall = sum(max(0.0, t - play_s) for t in fetch_times_s)
    total_play = play_s * len(fetch_times_s)
    ratio = stall / total_play
    mos = 1.0 + 3.5 * math.exp(-4.0 * ratio)
    return max(MOS_MIN, min(MOS_MAX, mos))


def flow_metrics(records: list[FrameRecord]) -> dict:
    """Aggregate frame records: goodput over the active interval (decimal
    Mbps), per-flow completion times (inf when censored), and delay jitter
    (mean absolute difference of successive per-frame delays)."""
    delivered = [r for r in records if r.delivered]
    out = {
        "goodput_mbps": 0.0,
        "flow_fct_s": [],
        "censored_flows": 0,
        "mean_delay_s": 0.0,
        "jitter_s": 0.0,
        "loss_fraction": (len(records) - len(delivered)) / len(records) if records else 0.0,
    }
    if not records:
        return out
    flows: dict[int, list[FrameRecord]] = {}
    for r in records:
        flows.setdefault(r.flow, []).append(r)
    fcts = []
    for fid in sorted(flows):
        group = flows[fid]
        if all(r.delivered for r in group):
            fcts.append(max(r.complete_s for r in group) - min(r.enqueue_s for r in group))
        else:
            fcts.append(math.inf)
            out["censored_flows"] += 1
    out["flow_fct_s"] = fcts

    if delivered:
        first = min(r.enqueue_s for r in records)
        last = max(r.complete_s for r in delivered)
        span = last - first
        bits = sum(r.payload_bytes * 8 for r in delivered)
        out["goodput_mbps"] = bits / span / 1e6 if span > 0 else 0.0
        delays = [r.complete_s - r.enqueue_s for r in delivered]
        out["mean_delay_s"] = sum(delays) / len(delays)
        if len(delays) > 1:
            diffs = [abs(b - a) for a, b in zip(delays, delays[1:])]
            out["jitter_s"] = sum(diffs) / len(diffs)
    return out


# ---------------------------------------------------------------------------
# Workload execution


def _run_bulk_flow(link: SimulatedLink, nbytes: int, flow: int,
                   deadline_s: float, records: list[FrameRecord]) -> bool:
    """Reliable closed-loop transfer of nbytes; returns True if completed."""
    payload = link.config.payload_bytes
    remaining = nbytes
    start = link.clock_s
    while remaining > 0:
        if link.clock_s >= deadline_s:
            records.append(FrameRecord(start, math.inf, remaining, False, flow))
            return False
        size = min(payload, remaining)
        outcome, _ = link.send_frame(size)
        if outcome.success:
            records.append(FrameRecord(start, link.clock_s, size, True, flow))
            remaining -= size
    return True


def run_workload(link: SimulatedLink, workload: WorkloadSpec,
                 deadline_s: float = 600.0) -> QoEResult:
    """Drive a workload over the link in virtual time and score it.

    deadline_s caps the run; transfers still incomplete at the deadline are
    censored (their flow completion time is +inf and excluded from means).
    """
    kind = workload.kind
    records: list[FrameRecord] = []
    t0 = link.clock_s

    if kind == "peak-throughput":
        dur = min(workload.duration_s, deadline_s)
        end = t0 + dur
        while link.clock_s < end:
            outcome, _ = link.send_frame()
            if outcome.success:
                records.append(FrameRecord(
                    t0, link.clock_s, link.config.payload_bytes, True, 0))
        fm = flow_metrics(records)
        bits = sum(r.payload_bytes * 8 for r in records if r.delivered)
        goodput = bits / (dur * 1e6)
        return QoEResult(kind=kind, metric_name="goodput_mbps", metric=goodput,
                         goodput_mbps=goodput, frames_sent=link.frames_sent,
                         frames_delivered=link.frames_delivered,
                         elapsed_s=link.clock_s - t0,
                         loss_fraction=fm["loss_fraction"])

    if kind in ("file-download", "web-page"):
        hard_deadline = t0 + deadline_s
        for flow in range(workload.repeats):
            if not _run_bulk_flow(link, workload.burst_bytes, flow, hard_deadline, records):
                break
        fm = flow_metrics(records)
        finite = [v for v in fm["flow_fct_s"] if not math.isinf(v)]
        if kind == "file-download":
            per_flow_goodput = [
                workload.burst_bytes * 8 / v / 1e6 for v in finite
            ]
            metric = sum(per_flow_goodput) / len(per_flow_goodput) if per_flow_goodput else 0.0
            name = "mean_flow_goodput_mbps"
        else:
            metric = sum(finite) / len(finite) if finite else math.inf
            name = "mean_fct_s"
        return QoEResult(kind=kind, metric_name=name, metric=metric,
                         goodput_mbps=fm["goodput_mbps"],
                         flow_fct_s=fm["flow_fct_s"],
                         censored_flows=fm["censored_flows"],
                         frames_sent=link.frames_sent,
                         frames_delivered=link.frames_delivered,
                         elapsed_s=link.clock_s - t0)

    if kind == "voip":
        n = int(workload.duration_s / workload.packet_interval_s)
        in_flight: list[float] = []  # completion times of queued/serving packets
        cap = link.config.queue_capacity
        dropped = 0
        for i in range(n):
            arrival = t0 + i * workload.packet_interval_s
            in_flight = [f for f in in_flight if f > arrival]
            if len(in_flight) >= cap:
                dropped += 1
                records.append(FrameRecord(arrival, math.inf, workload.packet_bytes, False, i))
                continue
            link.idle_until(arrival)
            outcome, _ = link.send_frame(workload.packet_bytes)
            in_flight.append(link.clock_s)
            records.append(FrameRecord(
                arrival, link.clock_s if outcome.success else math.inf,
                workload.packet_bytes, outcome.success, i))
        fm = flow_metrics(records)
        loss = fm["loss_fraction"]
        mean_delay_ms = fm["mean_delay_s"] * 1e3
        jitter_ms = fm["jitter_s"] * 1e3
        mos = voip_mos(loss, mean_delay_ms, jitter_ms)
        return QoEResult(kind=kind, metric_name="mos", metric=mos, mos=mos,
                         loss_fraction=loss, mean_delay_ms=mean_delay_ms,
                         jitter_ms=jitter_ms, frames_sent=link.frames_sent,
                         frames_delivered=link.frames_delivered,
                         elapsed_s=link.clock_s - t0)

    if kind == "video":
        hard_deadline = t0 + deadline_s
        fetch_times = []
        for seg in range(workload.segment_count):
            seg_start = link.clock_s
            done = _run_bulk_flow(link, workload.segment_bytes, seg, hard_deadline, records)
            if not done:
                fetch_times.append(math.inf)
                break
            fetch_times.append(link.clock_s - seg_start)
        finite = [t for t in fetch_times if not math.isinf(t)]
        mos = video_mos(finite, workload.segment_play_s) if finite else MOS_MIN
        fm = flow_metrics(records)
        return QoEResult(kind=kind, metric_name="mos", metric=mos, mos=mos,
                         goodput_mbps=fm["goodput_mbps"],
                         fetch_times_s=finite,
                         censored_flows=fm["censored_flows"],
                         frames_sent=link.frames_sent,
                         frames_delivered=link.frames_delivered,
                         elapsed_s=link.clock_s - t0)

    raise ValueError(f"unknown workload kind: {kind!r}")
