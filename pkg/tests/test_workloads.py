"""Tests for the application workloads and QoE models: spec defaults, the
E-model and stall-model fixed points, flow metrics against a hand-computed
log, and frame-level runs over simulated links."""
from __future__ import annotations

import math

import pytest

from ratelab.engine import FixedPolicy, PolicyEngine
from ratelab.link import LinkConfig, SimulatedLink
from ratelab.phy import ChannelModel, RateSpec, constant_trace, expected_goodput_bps
from ratelab.workloads import (
    FrameRecord,
    QoEResult,
    WorkloadSpec,
    flow_metrics,
    run_workload,
    video_mos,
    voip_mos,
)


def fixed_rate_link(
    mcs: int,
    rssi_dbm: float,
    seed: int = 1,
    **config_kwargs,
) -> SimulatedLink:
    channel = ChannelModel(rssi_trace=constant_trace(rssi_dbm))
    engine = PolicyEngine()
    engine.set_policy(FixedPolicy(RateSpec(mcs=mcs)))
    return SimulatedLink(channel, engine, seed=seed, config=LinkConfig(**config_kwargs))


# ---------------------------------------------------------------------------
# Workload specifications


def test_default_workload_parameters():
    peak = WorkloadSpec.peak_throughput()
    assert peak.duration_s == 10.0
    download = WorkloadSpec.file_download()
    assert download.burst_bytes == 25_000_000
    assert download.repeats == 3
    page = WorkloadSpec.web_page()
    assert page.burst_bytes == 1_246_000
    call = WorkloadSpec.voip()
    assert call.packet_bytes == 160
    assert call.packet_interval_s == 0.020
    assert call.duration_s == 30.0
    video = WorkloadSpec.video()
    assert video.segment_bytes == 1_800_000
    assert video.segment_play_s == 3.5


def test_of_kind_builds_each_workload():
    for kind in ("peak-throughput", "file-download", "web-page", "voip", "video"):
        assert WorkloadSpec.of_kind(kind).kind == kind


def test_of_kind_rejects_unknown_kinds():
    with pytest.raises(ValueError, match="unknown workload kind"):
        WorkloadSpec.of_kind("bittorrent")


def test_run_workload_rejects_unknown_kinds():
    link = fixed_rate_link(7, -30.0)
    with pytest.raises(ValueError, match="unknown workload kind"):
        run_workload(link, WorkloadSpec(kind="bittorrent"))


# ---------------------------------------------------------------------------
# VoIP MOS model


def test_voip_mos_clean_short_call_is_nearly_maximal():
    # loss 0, one-way delay 20 ms, no jitter: R = 93.2 - 0.48 = 92.72 and the
    # cubic map lands at 4.3998.
    assert voip_mos(0.0, 20.0, 0.0) == pytest.approx(4.400, abs=5e-4)


def test_voip_mos_total_loss_clamps_to_floor():
    assert voip_mos(1.0, 0.0, 0.0) == 1.0
    assert voip_mos(1.0, 20.0, 0.0) == 1.0


def test_voip_mos_decreases_with_loss():
    grid = [0.0, 0.01, 0.02, 0.05, 0.10, 0.30, 1.0]
    values = [voip_mos(loss, 20.0, 5.0) for loss in grid]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert voip_mos(0.05, 20.0, 0.0) < voip_mos(0.01, 20.0, 0.0)


def test_voip_mos_decreases_with_delay():
    grid = [0.0, 50.0, 100.0, 177.3, 200.0, 400.0]
    values = [voip_mos(0.01, d, 0.0) for d in grid]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_voip_mos_delay_penalty_steepens_past_the_knee():
    # below 177.3 ms the impairment slope is 0.024/ms; above it an extra
    # 0.11/ms term kicks in
    before = voip_mos(0.0, 167.3, 0.0) - voip_mos(0.0, 177.3, 0.0)
    after = voip_mos(0.0, 177.3, 0.0) - voip_mos(0.0, 187.3, 0.0)
    assert after > 2.0 * before


def test_voip_mos_counts_jitter_twice():
    assert voip_mos(0.0, 100.0, 10.0) == voip_mos(0.0, 120.0, 0.0)


def test_voip_mos_stays_in_range_on_a_parameter_grid():
    for loss in (0.0, 0.1, 0.5, 1.0):
        for delay in (0.0, 50.0, 200.0, 500.0):
            for jitter in (0.0, 10.0, 50.0):
                assert 1.0 <= voip_mos(loss, delay, jitter) <= 4.5


# ---------------------------------------------------------------------------
# Video MOS model


def test_video_mos_without_stalls_is_maximal():
    assert video_mos([0.5, 1.0, 3.5, 2.0]) == 4.5


def test_video_mos_at_full_stall_ratio():
    # one segment fetched in 7 s against 3.5 s of content: stall ratio 1.0;
    # 1 + 3.5 * exp(-4) = 1.0641
    assert video_mos([7.0]) == pytest.approx(1.0641, abs=5e-5)


def test_video_mos_decreases_when_any_fetch_slows():
    base = [1.0, 2.0, 3.0, 4.0, 5.0]
    base_mos = video_mos(base)
    for i in range(len(base)):
        bumped = list(base)
        bumped[i] += 0.5
        assert video_mos(bumped) <= base_mos
    stalled = list(base)
    stalled[4] += 0.5  # already past the play time: strictly worse
    assert video_mos(stalled) < base_mos


def test_video_mos_of_empty_fetch_list_is_floor():
    assert video_mos([]) == 1.0


def test_video_mos_stays_in_range():
    for fetch in ([0.1], [3.5], [10.0], [100.0], [3.5] * 20 + [50.0]):
        assert 1.0 <= video_mos(fetch) <= 4.5


# ---------------------------------------------------------------------------
# Flow metrics against a hand-computed ten-frame log


def ten_frame_log() -> list[FrameRecord]:
    return [
        FrameRecord(0.0, 0.25, 1000, True, 0),
        FrameRecord(0.0, 0.5, 1000, True, 0),
        FrameRecord(0.25, 0.75, 500, True, 0),
        FrameRecord(0.5, 1.0, 1000, True, 1),
        FrameRecord(0.5, math.inf, 1000, False, 1),
        FrameRecord(1.0, 1.25, 250, True, 2),
        FrameRecord(1.0, 1.5, 250, True, 2),
        FrameRecord(1.25, 2.0, 250, True, 2),
        FrameRecord(1.5, 2.25, 250, True, 2),
        FrameRecord(2.0, 2.5, 250, True, 2),
    ]


def test_flow_metrics_match_hand_computation():
    m = flow_metrics(ten_frame_log())
    # 9 of 10 frames delivered
    assert m["loss_fraction"] == pytest.approx(0.1)
    # delivered bits: (1000+1000+500+1000+5*250) * 8 = 38000 over 2.5 s
    assert m["goodput_mbps"] == pytest.approx(38000 / 2.5 / 1e6)
    # flow 0 completes 0.0 -> 0.75; flow 1 is censored; flow 2 spans 1.0 -> 2.5
    assert m["flow_fct_s"][0] == pytest.approx(0.75)
    assert math.isinf(m["flow_fct_s"][1])
    assert m["flow_fct_s"][2] == pytest.approx(1.5)
    assert m["censored_flows"] == 1
    # per-frame delays of delivered frames, in record order:
    # 0.25 0.5 0.5 0.5 0.25 0.5 0.75 0.75 0.5 -> mean 0.5
    assert m["mean_delay_s"] == pytest.approx(0.5)
    # successive absolute differences: 0.25 0 0 0.25 0.25 0.25 0 0.25 -> mean
    assert m["jitter_s"] == pytest.approx(1.25 / 8)


def test_flow_metrics_of_empty_log():
    m = flow_metrics([])
    assert m["goodput_mbps"] == 0.0
    assert m["flow_fct_s"] == []
    assert m["loss_fraction"] == 0.0


def test_single_fully_delivered_burst_has_one_fct():
    records = [
        FrameRecord(0.0, 0.1, 1500, True, 0),
        FrameRecord(0.0, 0.2, 1500, True, 0),
        FrameRecord(0.1, 0.4, 1500, True, 0),
    ]
    m = flow_metrics(records)
    assert m["flow_fct_s"] == [pytest.approx(0.4)]
    assert m["censored_flows"] == 0


def test_goodput_arithmetic_uses_decimal_megabits():
    records = [FrameRecord(0.0, 20.0, 25_000_000, True, 0)]
    assert flow_metrics(records)["goodput_mbps"] == pytest.approx(10.0)


# ---------------------------------------------------------------------------
# Workload runs over a simulated link


def test_peak_throughput_on_a_strong_channel_matches_closed_form():
    link = fixed_rate_link(7, -30.0)
    result = run_workload(link, WorkloadSpec.peak_throughput(duration_s=2.0))
    analytic = expected_goodput_bps(link.channel, RateSpec(mcs=7), -30.0) / 1e6
    assert result.metric_name == "goodput_mbps"
    assert result.metric == pytest.approx(analytic, rel=0.02)
    # sanity anchor: payload_bits / (overhead + payload_bits / phy_rate)
    per_frame_us = 50.0 + 12000 / 65.0
    assert analytic == pytest.approx(12000 / per_frame_us, rel=0.01)


def test_peak_throughput_never_beats_the_top_phy_rate():
    for rssi in (-30.0, -60.0, -75.0):
        link = fixed_rate_link(7, rssi)
        result = run_workload(link, WorkloadSpec.peak_throughput(duration_s=1.0))
        assert result.metric <= 65.0


def test_web_page_fetch_time_matches_airtime_arithmetic():
    link = fixed_rate_link(7, -30.0)
    result = run_workload(link, WorkloadSpec.web_page())
    analytic_goodput = expected_goodput_bps(link.channel, RateSpec(mcs=7), -30.0)
    analytic_fct = 1_246_000 * 8 / analytic_goodput
    assert result.metric_name == "mean_fct_s"
    assert result.metric == pytest.approx(analytic_fct, rel=0.10)
    assert result.censored_flows == 0
    assert len(result.flow_fct_s) == 3


def test_file_download_reports_mean_per_flow_goodput():
    link = fixed_rate_link(7, -30.0)
    result = run_workload(
        link, WorkloadSpec.file_download(burst_mb=0.3, repeats=2))
    assert result.metric_name == "mean_flow_goodput_mbps"
    analytic = expected_goodput_bps(link.channel, RateSpec(mcs=7), -30.0) / 1e6
    assert result.metric == pytest.approx(analytic, rel=0.05)
    assert result.censored_flows == 0


def test_bulk_transfer_censors_flows_cut_off_by_the_deadline():
    link = fixed_rate_link(7, -30.0)
    result = run_workload(link, WorkloadSpec.web_page(), deadline_s=0.05)
    assert result.censored_flows >= 1
    assert math.isinf(result.metric)
    assert any(math.isinf(v) for v in result.flow_fct_s)


def test_voip_on_a_dead_channel_loses_everything():
    link = fixed_rate_link(0, -150.0)
    result = run_workload(link, WorkloadSpec.voip(duration_s=10.0))
    assert result.loss_fraction == 1.0
    assert result.metric == 1.0  # MOS floor
    assert result.frames_delivered == 0


def test_voip_on_a_strong_channel_scores_high():
    link = fixed_rate_link(7, -30.0)
    result = run_workload(link, WorkloadSpec.voip(duration_s=5.0))
    assert result.metric_name == "mos"
    assert result.loss_fraction == 0.0
    assert result.metric > 4.3
    assert result.mos == result.metric


def test_voip_sends_one_packet_per_interval():
    link = fixed_rate_link(7, -30.0)
    result = run_workload(link, WorkloadSpec.voip(duration_s=1.0))
    assert result.frames_sent == 50
    # pacing is open-loop: the link idles until each 20 ms arrival, so the
    # run spans the full second rather than saturating
    assert result.elapsed_s >= 49 * 0.020


def test_voip_with_zero_queue_capacity_drops_every_packet():
    link = fixed_rate_link(7, -30.0, queue_capacity=0)
    result = run_workload(link, WorkloadSpec.voip(duration_s=1.0))
    assert link.frames_sent == 0
    assert result.loss_fraction == 1.0


def test_video_delivers_whole_segments_and_scores_mos():
    link = fixed_rate_link(7, -30.0)
    spec = WorkloadSpec.video(segment_mb=0.15, segments=3)
    result = run_workload(link, spec)
    assert result.metric_name == "mos"
    assert result.metric == 4.5  # fetches far below the play time
    assert len(result.fetch_times_s) == 3
    assert all(t < 3.5 for t in result.fetch_times_s)


def test_video_byte_accounting_per_segment_is_exact():
    link = fixed_rate_link(7, -30.0)
    spec = WorkloadSpec.video(segment_mb=0.15, segments=2)
    run_workload(link, spec)
    # every delivered frame belongs to a segment flow whose bytes sum exactly
    delivered_bits = sum(link.delivered_bits_by_mcs.values())
    assert delivered_bits == 2 * 150_000 * 8


def test_video_on_a_weak_link_stalls_and_loses_mos():
    link = fixed_rate_link(0, -90.0)  # ~1.9 Mbps: each 1.8 MB segment takes ~7.5 s
    spec = WorkloadSpec.video(segment_mb=1.8, segments=2)
    result = run_workload(link, spec)
    assert any(t > 3.5 for t in result.fetch_times_s)
    assert 1.0 <= result.metric < 4.5


def test_qoe_result_serializes_infinities_as_null():
    result = QoEResult(
        kind="web-page", metric_name="mean_fct_s", metric=math.inf,
        flow_fct_s=[1.5, math.inf],
    )
    d = result.to_json_dict()
    assert d["flow_fct_s"] == [1.5, None]
    assert d["kind"] == "web-page"
