"""Experiment orchestration: paired A/B runs with normalized reports, rate
sweeps, and the scoring-noise demonstration showing why raw goodput is a
misleading fitness signal on a drifting channel.

Pairing design: every algorithm in a pair replays the identical seeded
channel segment, so per-pair metric deltas isolate the algorithm effect.
Reports carry the pair seeds and RSSI-trace hashes needed to audit that.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .engine import PolicyEngine, RoundRobinPolicy
from .link import SimulatedLink
from .phy import (
    ChannelModel,
    MCS_COUNT,
    RateSpec,
    constant_trace,
    default_fallback_ladder,
    expected_goodput_bps,
    phy_rate_kbps,
    random_walk_trace,
    transmit_frame,
)
from .scenario import AlgorithmSpec, Scenario, ScenarioError
from .workloads import WorkloadSpec, run_workload

# metrics where a smaller value is better; inverted before normalization
LOWER_IS_BETTER = frozenset({"mean_fct_s"})


class DeploymentError(Exception):
    """An algorithm in the plan could not be built/deployed."""


def default_workload_suite() -> tuple[WorkloadSpec, ...]:
    return (
        WorkloadSpec.peak_throughput(),
        WorkloadSpec.file_download(),
        WorkloadSpec.web_page(),
        WorkloadSpec.voip(),
        WorkloadSpec.video(),
    )


@dataclass
class ExperimentPlan:
    """A/B rotation plan: which algorithms, which workloads, how many paired
    channel segments, and how long each sample runs (simulated seconds)."""

    scenario: Scenario
    seed: int = 0
    algorithms: tuple[AlgorithmSpec, ...] = ()
    workloads: tuple[WorkloadSpec, ...] = ()
    pairs: int = 0
    sample_duration_s: float = 0.0

    def __post_init__(self):
        if not self.algorithms:
            self.algorithms = tuple(self.scenario.algorithms)
        if not self.workloads:
            self.workloads = tuple(self.scenario.workloads)
        if self.pairs <= 0:
            self.pairs = self.scenario.pairs
        if self.sample_duration_s <= 0:
            self.sample_duration_s = self.scenario.sample_duration_s
        if self.pairs < 1:
            raise ValueError("pairs must be >= 1")
        if len(self.algorithms) < 1:
            raise ValueError("plan needs at least one algorithm")
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise ValueError(f"algorithm names must be unique: {names}")


@dataclass
class Report:
    """A/B results: raw per-pair metrics, medians, and per-workload
    normalized scores where the best algorithm gets exactly 1.0."""

    seed: int
    scenario_name: str
    pairs: int
    sample_duration_s: float
    algorithms: list[str]
    workload_kinds: list[str]
    pair_seeds: list[int]
    pairing: list[dict] = field(default_factory=list)
    results: dict = field(default_factory=dict)  # kind -> alg -> cell
    scores: dict = field(default_factory=dict)  # alg -> mean normalized

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "scenario_name": self.scenario_name,
            "pairs": self.pairs,
            "sample_duration_s": self.sample_duration_s,
            "algorithms": list(self.algorithms),
            "workload_kinds": list(self.workload_kinds),
            "pair_seeds": list(self.pair_seeds),
            "pairing": list(self.pairing),
            "results": self.results,
            "scores": self.scores,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Report":
        return cls(
            seed=d["seed"],
            scenario_name=d["scenario_name"],
            pairs=d["pairs"],
            sample_duration_s=d["sample_duration_s"],
            algorithms=list(d["algorithms"]),
            workload_kinds=list(d["workload_kinds"]),
            pair_seeds=list(d["pair_seeds"]),
            pairing=list(d["pairing"]),
            results=d["results"],
            scores=d["scores"],
        )


def pair_seed(base_seed: int, pair: int) -> int:
    """Derive one pair's channel seed from the plan seed."""
    return base_seed * 1_000_003 + pair * 7_919 + 17


def trace_hash(channel: ChannelModel, duration_s: float, step_s: float = 0.1) -> str:
    """Hash of the RSSI trace sampled on a fixed grid; equal hashes across a
    pair's arms certify they replayed the same channel realization."""
    h = hashlib.sha256()
    n = int(duration_s / step_s) + 1
    for i in range(n):
        h.update(f"{channel.rssi_at(i * step_s):.6f},".encode())
    return h.hexdigest()[:16]


def _build_or_abort(alg: AlgorithmSpec, seed: int):
    try:
        return alg.build(seed=seed)
    except ScenarioError as e:
        raise DeploymentError(f"algorithm {alg.name!r} failed to deploy: {e}") from e


def run_ab_test(plan: ExperimentPlan) -> Report:
    """Run every algorithm against every workload on each paired channel
    segment; aggregate medians and per-workload normalized scores."""
    for alg in plan.algorithms:
        _build_or_abort(alg, seed=plan.seed)  # fail fast with diagnostics

    seeds = [pair_seed(plan.seed, p) for p in range(plan.pairs)]
    kinds = [w.kind for w in plan.workloads]
    report = Report(
        seed=plan.seed,
        scenario_name=plan.scenario.name,
        pairs=plan.pairs,
        sample_duration_s=plan.sample_duration_s,
        algorithms=[a.name for a in plan.algorithms],
        workload_kinds=kinds,
        pair_seeds=seeds,
    )

    cells: dict[str, dict[str, list[dict]]] = {k: {a.name: [] for a in plan.algorithms}
                                               for k in kinds}
    for pair, ps in enumerate(seeds):
        hash_by_alg: dict[str, str] = {}
        for alg in plan.algorithms:
            for wl in plan.workloads:
                channel = plan.scenario.channel(ps)
                rssi_hash = trace_hash(channel, plan.sample_duration_s)
                hash_by_alg.setdefault(alg.name, rssi_hash)
                engine = PolicyEngine()
                controller = _build_or_abort(alg, seed=ps)
                link = SimulatedLink(channel, engine, controller,
                                     plan.scenario.link, seed=ps)
                res = run_workload(link, wl, deadline_s=plan.sample_duration_s)
                cells[wl.kind][alg.name].append({
                    "pair": pair,
                    "seed": ps,
                    "rssi_hash": rssi_hash,
                    "metric": res.metric,
                    "goodput_mbps": res.goodput_mbps,
                    "frames_sent": res.frames_sent,
                    "frames_delivered": res.frames_delivered,
                })
        report.pairing.append({
            "pair": pair,
            "seed": ps,
            "rssi_hashes": {a: hash_by_alg[a] for a in sorted(hash_by_alg)},
        })

    for wl in plan.workloads:
        kind = wl.kind
        report.results[kind] = {}
        for alg in plan.algorithms:
            rows = cells[kind][alg.name]
            values = [r["metric"] for r in rows]
            all_finite = all(math.isfinite(v) for v in values)
            median = statistics.median(values)
            report.results[kind][alg.name] = {
                "metric_name": _metric_name_for(kind),
                "orientation": ("lower-better"
                                if _metric_name_for(kind) in LOWER_IS_BETTER
                                else "higher-better"),
                "per_pair": rows,
                "median": median if math.isfinite(median) else None,
                "mean": (sum(values) / len(values)) if values and all_finite else None,
            }
        _normalize_workload(report.results[kind])

    for alg in report.algorithms:
        vals = [report.results[k][alg]["normalized"] for k in kinds]
        report.scores[alg] = sum(vals) / len(vals) if vals else 0.0
    return report


def _metric_name_for(kind: str) -> str:
    return {
        "peak-throughput": "goodput_mbps",
        "file-download": "mean_flow_goodput_mbps",
        "web-page": "mean_fct_s",
        "voip": "mos",
        "video": "mos",
    }[kind]


def _normalize_workload(by_alg: dict) -> None:
    """Attach normalized scores: orientation-corrected, best = exactly 1.0."""
    medians = {}
    for alg, cell in by_alg.items():
        m = cell["median"]
        medians[alg] = math.inf if m is None else m
    lower_better = next(iter(by_alg.values()))["metric_name"] in LOWER_IS_BETTER
    if lower_better:
        best = min(medians.values())
        for alg, cell in by_alg.items():
            v = medians[alg]
            if not math.isfinite(best) or best <= 0.0:
                cell["normalized"] = 1.0 if v == best else 0.0
            elif not math.isfinite(v) or v <= 0.0:
                cell["normalized"] = 0.0
            else:
                cell["normalized"] = best / v
    else:
        best = max(medians.values())
        for alg, cell in by_alg.items():
            v = medians[alg]
            if not math.isfinite(best) or best <= 0.0:
                cell["normalized"] = 1.0 if v == best else 0.0
            elif not math.isfinite(v):
                cell["normalized"] = 0.0
            else:
                cell["normalized"] = v / best


# ---------------------------------------------------------------------------
# Rate sweep


def sweep_all_rates(link: SimulatedLink, frames_per_rate: int,
                    cycles: int = 16) -> dict[int, dict]:
    """Round-robin over MCS 0-7, frames_per_rate frames at each before
    advancing, for the given number of full cycles; aggregates delivery and
    goodput per intended (configured) MCS from telemetry and link accounting.
    """
    if frames_per_rate < 1:
        raise ValueError("frames_per_rate must be >= 1")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    rates = tuple(RateSpec(mcs=m) for m in range(MCS_COUNT))
    link.engine.set_policy(RoundRobinPolicy(rates, frames_per_rate))
    saved_controller, link.controller = link.controller, None

    air0 = dict(link.airtime_by_mcs)
    bits0 = dict(link.delivered_bits_by_mcs)
    frames = {m: 0 for m in range(MCS_COUNT)}
    delivered = {m: 0 for m in range(MCS_COUNT)}
    try:
        link.engine.telemetry.snapshot_read()  # start from an empty window
        total = frames_per_rate * MCS_COUNT * cycles
        for i in range(total):
            _, ctx = link.send_frame()
            frames[ctx.mcs_used] += 1
            delivered[ctx.mcs_used] += 1 if ctx.success else 0
            if (i + 1) % 2048 == 0:
                link.engine.telemetry.snapshot_read()  # avoid ring overflow
    finally:
        link.controller = saved_controller

    out: dict[int, dict] = {}
    for m in range(MCS_COUNT):
        n = frames[m]
        airtime_us = link.airtime_by_mcs.get(m, 0.0) - air0.get(m, 0.0)
        bits = link.delivered_bits_by_mcs.get(m, 0) - bits0.get(m, 0)
        out[m] = {
            "frames": n,
            "delivery_ratio": (delivered[m] / n) if n else 0.0,
            "goodput_mbps": (bits / (airtime_us * 1e-6) / 1e6) if airtime_us > 0 else 0.0,
            "phy_rate_mbps": phy_rate_kbps(RateSpec(mcs=m)) / 1e3,
        }
    return out


# ---------------------------------------------------------------------------
# Scoring-noise demonstration


def _measure_epoch(channel: ChannelModel, mcs: int, t0: float, epoch_s: float,
                   rng: random.Random, retry_limit: int = 3,
                   frame_bytes: int = 1500) -> tuple[float, float]:
    """Saturating fixed-rate transmit loop over one epoch; returns (goodput
    bps, mean observed RSSI)."""
    spec = RateSpec(mcs=mcs)
    ladder = default_fallback_ladder(spec)
    t = t0
    bits = 0
    rssi_sum = 0.0
    n = 0
    while t < t0 + epoch_s:
        rssi_sum += channel.rssi_at(t)
        n += 1
        outcome = transmit_frame(channel, t, spec, retry_limit, ladder, rng,
                                 frame_bytes=frame_bytes)
        t += outcome.airtime_us * 1e-6
        if outcome.success:
            bits += frame_bytes * 8
    return bits / (t - t0), rssi_sum / max(n, 1)


def oracle_goodput_bps(channel: ChannelModel, rssi: float,
                       retry_limit: int = 3, frame_bytes: int = 1500) -> float:
    """Channel capacity proxy: the best fixed rate's expected goodput at a
    given RSSI, by exhaustive search over MCS 0-7."""
    return max(
        expected_goodput_bps(channel, RateSpec(mcs=m), rssi,
                             retry_limit=retry_limit, frame_bytes=frame_bytes)
        for m in range(MCS_COUNT)
    )


def scoring_noise_demo(
    seed: int,
    trials: int = 200,
    candidate_a_mcs: int = 5,
    candidate_b_mcs: int = 4,
    epoch_s: float = 1.5,
    start_dbm: float = -75.0,
    drift_db_per_s: float = 2.0,
    sigma_db: float = 0.25,
    constant_channel: bool = False,
) -> dict:
    """Show how sequential (non-paired) scoring misranks candidates on a
    drifting channel.

    Candidate A is truly better by the oracle definition: higher mean
    expected goodput over the fixed RSSI grid the trace spans. Each trial
    scores A on the first epoch and B on the second (B's epoch enjoys the
    drift). The naive scorer compares raw goodput; the normalized scorer
    divides each measurement by the oracle goodput at that epoch's measured
    mean RSSI before comparing.
    """
    grid_lo = start_dbm
    grid_hi = start_dbm + (0.0 if constant_channel else drift_db_per_s * 2 * epoch_s)
    ref = ChannelModel(rssi_trace=constant_trace(start_dbm))
    grid = [grid_lo + i * 0.5 for i in range(int((grid_hi - grid_lo) / 0.5) + 1)]
    true_scores = {}
    for label, mcs in (("a", candidate_a_mcs), ("b", candidate_b_mcs)):
        vals = [expected_goodput_bps(ref, RateSpec(mcs=mcs), r) for r in grid]
        true_scores[label] = sum(vals) / len(vals)
    true_best = "a" if true_scores["a"] >= true_scores["b"] else "b"

    series = []
    naive_errors = 0
    normalized_errors = 0
    for i in range(trials):
        trial_seed = seed * 99_991 + i
        if constant_channel:
            trace = constant_trace(start_dbm)
        else:
            trace = random_walk_trace(
                seed=trial_seed, start_dbm=start_dbm, sigma_db=sigma_db,
                dt_s=0.05, duration_s=2 * epoch_s + 1.0,
                drift_db_per_s=drift_db_per_s)
        channel = ChannelModel(rssi_trace=trace, seed=trial_seed)
        rng_a = random.Random(trial_seed * 2 + 1)
        rng_b = random.Random(trial_seed * 2 + 2)
        goodput_a, rssi_a = _measure_epoch(channel, candidate_a_mcs, 0.0, epoch_s, rng_a)
        goodput_b, rssi_b = _measure_epoch(channel, candidate_b_mcs, epoch_s, epoch_s, rng_b)

        naive_pick = "a" if goodput_a >= goodput_b else "b"
        norm_a = goodput_a / oracle_goodput_bps(channel, rssi_a)
        norm_b = goodput_b / oracle_goodput_bps(channel, rssi_b)
        normalized_pick = "a" if norm_a >= norm_b else "b"
        naive_errors += naive_pick != true_best
        normalized_errors += normalized_pick != true_best
        series.append({
            "trial": i,
            "seed": trial_seed,
            "mean_rssi_a": rssi_a,
            "mean_rssi_b": rssi_b,
            "goodput_mbps_a": goodput_a / 1e6,
            "goodput_mbps_b": goodput_b / 1e6,
            "normalized_a": norm_a,
            "normalized_b": norm_b,
            "naive_pick": naive_pick,
            "normalized_pick": normalized_pick,
        })

    return {
        "trials": trials,
        "true_best": true_best,
        "oracle_mean_goodput_mbps": {k: v / 1e6 for k, v in true_scores.items()},
        "naive_pick_error_rate": naive_errors / trials,
        "normalized_pick_error_rate": normalized_errors / trials,
        "series": series,
    }


# ---------------------------------------------------------------------------
# Report emission


def emit_report(report: Report, fmt: str = "json",
                out_dir: str | Path = ".") -> list[Path]:
    """Write the report as report.json or report.csv under out_dir; returns
    the written paths. CSV has one row per (workload, algorithm)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if fmt == "json":
        path = out / "report.json"
        path.write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    elif fmt == "csv":
        path = out / "report.csv"
        with path.open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["workload", "algorithm", "metric_name", "median",
                        "mean", "normalized", "pairs", "seed"])
            for kind in report.workload_kinds:
                for alg in report.algorithms:
                    cell = report.results[kind][alg]
                    w.writerow([
                        kind, alg, cell["metric_name"],
                        _csv_num(cell["median"]), _csv_num(cell["mean"]),
                        _csv_num(cell["normalized"]), report.pairs, report.seed,
                    ])
        written.append(path)
    else:
        raise ValueError(f"unknown report format: {fmt!r}")
    return written


def _csv_num(v) -> str:
    if v is None:
        return ""
    return repr(v)
