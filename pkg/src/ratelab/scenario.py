"""Scenario files: JSON descriptions of a channel, link, workloads and the
candidate algorithms. See docs/scenarios.md for the schema."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .controllers import RateController, make_controller
from .link import LinkConfig
from .phy import (
    ChannelModel,
    constant_trace,
    default_thresholds,
    linear_trace,
    random_walk_trace,
    sinusoid_trace,
)
from .policyscript import lint, parse, verify
from .workloads import WorkloadSpec


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class TraceSpec:
    kind: str = "constant"
    params: tuple = ()

    def build(self, seed: int):
        p = dict(self.params)
        if self.kind == "constant":
            return constant_trace(p.get("level_dbm", -60.0))
        if self.kind == "linear":
            return linear_trace(p.get("start_dbm", -85.0), p.get("slope_db_per_s", 1.0))
        if self.kind == "sinusoid":
            return sinusoid_trace(p.get("mean_dbm", -75.0), p.get("amplitude_db", 6.0),
                                  p.get("period_s", 20.0))
        if self.kind == "random-walk":
            return random_walk_trace(
                seed=seed,
                start_dbm=p.get("start_dbm", -70.0),
                sigma_db=p.get("sigma_db", 0.5),
                dt_s=p.get("dt_s", 0.05),
                duration_s=p.get("duration_s", 600.0),
                drift_db_per_s=p.get("drift_db_per_s", 0.0),
                interference_rate_per_s=p.get("interference_rate_per_s", 0.0),
                interference_depth_db=p.get("interference_depth_db", 12.0),
                interference_duration_s=p.get("interference_duration_s", 0.5),
            )
        raise ScenarioError(f"unknown trace kind: {self.kind!r}")


@dataclass(frozen=True)
class AlgorithmSpec:
    """One candidate algorithm: a named controller or a DSL program."""

    name: str
    type: str
    params: tuple = ()

    def build(self, seed: int = 0) -> RateController:
        p = dict(self.params)
        if self.type == "program":
            from .controllers import ProgramController

            source = p.get("source")
            if source is None and "path" in p:
                source = Path(p["path"]).read_text()
            if source is None:
                raise ScenarioError(f"algorithm {self.name!r}: program needs source or path")
            ast = parse(source)
            diags = lint(ast)
            if diags:
                lines = "; ".join(f"line {d.line} rule {d.rule}: {d.message}" for d in diags)
                raise ScenarioError(f"algorithm {self.name!r} failed lint: {lines}")
            report = verify(ast)
            if not report.ok:
                raise ScenarioError(f"algorithm {self.name!r} failed verification:\n{report.log}")
            return ProgramController(self.name, ast)
        if self.type == "minstrel":
            p.setdefault("seed", seed)
        return make_controller(self.type, **p)


@dataclass
class Scenario:
    name: str = "default"
    thresholds: tuple[float, ...] = field(default_factory=default_thresholds)
    width: float = 2.0
    legacy_margin_db: float = 3.0
    trace: TraceSpec = TraceSpec("random-walk", (("start_dbm", -72.0), ("sigma_db", 0.4)))
    link: LinkConfig = field(default_factory=LinkConfig)
    workloads: tuple[WorkloadSpec, ...] = (WorkloadSpec.peak_throughput(),)
    algorithms: tuple[AlgorithmSpec, ...] = (
        AlgorithmSpec("iterate3", "iterate3"),
        AlgorithmSpec("minstrel", "minstrel"),
    )
    pairs: int = 15
    sample_duration_s: float = 120.0

    def channel(self, seed: int) -> ChannelModel:
        return ChannelModel(
            thresholds=tuple(self.thresholds),
            width=self.width,
            rssi_trace=self.trace.build(seed),
            seed=seed,
            legacy_margin_db=self.legacy_margin_db,
        )

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "channel": {
                "thresholds": list(self.thresholds),
                "width": self.width,
                "legacy_margin_db": self.legacy_margin_db,
                "trace": {"kind": self.trace.kind, **dict(self.trace.params)},
            },
            "link": {
                "wcid": self.link.wcid,
                "retry_limit": self.link.retry_limit,
                "payload_bytes": self.link.payload_bytes,
                "overhead_us": self.link.overhead_us,
                "queue_capacity": self.link.queue_capacity,
            },
            "workloads": [_workload_to_dict(w) for w in self.workloads],
            "algorithms": [
                {"name": a.name, "type": a.type, **dict(a.params)} for a in self.algorithms
            ],
            "pairs": self.pairs,
            "sample_duration_s": self.sample_duration_s,
        }


def _workload_to_dict(w: WorkloadSpec) -> dict:
    base = {"kind": w.kind}
    if w.kind == "peak-throughput":
        base["duration_s"] = w.duration_s
    elif w.kind == "file-download":
        base.update(burst_mb=w.burst_bytes / 1e6, repeats=w.repeats)
    elif w.kind == "web-page":
        base.update(page_kb=w.burst_bytes / 1e3, repeats=w.repeats)
    elif w.kind == "voip":
        base.update(packet_bytes=w.packet_bytes, interval_s=w.packet_interval_s,
                    duration_s=w.duration_s)
    elif w.kind == "video":
        base.update(segment_mb=w.segment_bytes / 1e6, segments=w.segment_count,
                    play_s=w.segment_play_s)
    return base


def _workload_from_dict(d: dict) -> WorkloadSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind is None:
        raise ScenarioError("workload needs a 'kind'")
    try:
        return WorkloadSpec.of_kind(kind, **d)
    except TypeError as e:
        raise ScenarioError(f"bad workload parameters for {kind!r}: {e}") from None


def scenario_from_dict(data: dict) -> Scenario:
    sc = Scenario()
    out = {}
    out["name"] = data.get("name", "unnamed")
    ch = data.get("channel", {})
    out["thresholds"] = tuple(ch.get("thresholds", default_thresholds()))
    out["width"] = ch.get("width", 2.0)
    out["legacy_margin_db"] = ch.get("legacy_margin_db", 3.0)
    tr = dict(ch.get("trace", {"kind": "constant", "level_dbm": -60.0}))
    kind = tr.pop("kind", "constant")
    out["trace"] = TraceSpec(kind, tuple(sorted(tr.items())))
    ln = data.get("link", {})
    out["link"] = LinkConfig(
        wcid=ln.get("wcid", 1),
        retry_limit=ln.get("retry_limit", 3),
        payload_bytes=ln.get("payload_bytes", 1500),
        overhead_us=ln.get("overhead_us", 50.0),
        queue_capacity=ln.get("queue_capacity", 128),
    )
    wl = data.get("workloads")
    out["workloads"] = tuple(_workload_from_dict(w) for w in wl) if wl else sc.workloads
    algos = data.get("algorithms")
    if algos:
        specs = []
        for a in algos:
            a = dict(a)
            atype = a.pop("type", None)
            if atype is None:
                raise ScenarioError("algorithm needs a 'type'")
            name = a.pop("name", atype)
            specs.append(AlgorithmSpec(name, atype, tuple(sorted(a.items()))))
        out["algorithms"] = tuple(specs)
    out["pairs"] = data.get("pairs", 15)
    out["sample_duration_s"] = data.get("sample_duration_s", 120.0)
    return Scenario(**out)


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: not valid JSON: {e}") from None
    return scenario_from_dict(data)


def default_scenario() -> Scenario:
    return Scenario()
