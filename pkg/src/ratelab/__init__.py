"""ratelab: a deterministic, desk-scale Wi-Fi rate-control laboratory.

A simulated 802.11n link with firmware-style rate fallback; a policy engine
with shared rate/stats/algorithm maps, a telemetry ring and batched stats; a
small verified policy DSL with a linter, static verifier and sandboxed
interpreter; native reference controllers; application workloads with QoE
scoring; a management daemon with an undo log; and a paired A/B experiment
harness with RSSI-normalized reporting.
"""

from .controllers import (
    Iterate3Controller,
    IterateParams,
    MinstrelController,
    MinstrelState,
    HoldRetestController,
    FixedController,
    ProgramController,
    RateController,
    fresh_algo_state,
    hold_retest_step,
    iterate3_step,
    make_controller,
    minstrel_best,
    minstrel_step,
)
from .controlplane import Ack, ControlClient, Daemon, DaemonServer, MessageBus, serve
from .engine import (
    EngineError,
    FixedPolicy,
    FrameTypePolicy,
    InvalidWcid,
    MapGeometryError,
    PerStationPolicy,
    PolicyEngine,
    PolicyError,
    ProgramPolicy,
    RoundRobinPolicy,
)
from .harness import (
    DeploymentError,
    ExperimentPlan,
    Report,
    default_workload_suite,
    emit_report,
    oracle_goodput_bps,
    run_ab_test,
    scoring_noise_demo,
    sweep_all_rates,
)
from .link import LinkConfig, SimulatedLink
from .phy import (
    ChannelModel,
    HT_RATE_KBPS,
    LEGACY_RATE_KBPS,
    MCS_COUNT,
    RateSpec,
    TxOutcome,
    airtime_us,
    constant_trace,
    default_fallback_ladder,
    default_thresholds,
    expected_goodput_bps,
    linear_trace,
    oracle_best_mcs,
    phy_rate_kbps,
    random_walk_trace,
    sinusoid_trace,
    success_probability,
    transmit_frame,
)
from .policyscript import (
    ITERATE3_SOURCE,
    LintDiagnostic,
    StepBudgetExceeded,
    VerifierReport,
    builtin_program,
    execute,
    lint,
    parse,
    verify,
)
from .records import (
    CTX_FIELDS,
    RateMapEntry,
    StatsEntry,
    TelemetryEntry,
    TxStatusContext,
)
from .scenario import (
    AlgorithmSpec,
    Scenario,
    ScenarioError,
    TraceSpec,
    default_scenario,
    load_scenario,
    scenario_from_dict,
)
from .telemetry import TelemetryRing, aggregate_stats
from .workloads import (
    QoEResult,
    WorkloadSpec,
    flow_metrics,
    run_workload,
    video_mos,
    voip_mos,
)

__version__ = "0.1.0"

__all__ = [
    "Ack",
    "AlgorithmSpec",
    "ChannelModel",
    "ControlClient",
    "CTX_FIELDS",
    "Daemon",
    "DaemonServer",
    "DeploymentError",
    "EngineError",
    "ExperimentPlan",
    "FixedController",
    "FixedPolicy",
    "FrameTypePolicy",
    "HoldRetestController",
    "HT_RATE_KBPS",
    "InvalidWcid",
    "ITERATE3_SOURCE",
    "Iterate3Controller",
    "IterateParams",
    "LEGACY_RATE_KBPS",
    "LinkConfig",
    "LintDiagnostic",
    "MapGeometryError",
    "MCS_COUNT",
    "MessageBus",
    "MinstrelController",
    "MinstrelState",
    "PerStationPolicy",
    "PolicyEngine",
    "PolicyError",
    "ProgramController",
    "ProgramPolicy",
    "QoEResult",
    "RateController",
    "RateMapEntry",
    "RateSpec",
    "Report",
    "RoundRobinPolicy",
    "Scenario",
    "ScenarioError",
    "SimulatedLink",
    "StatsEntry",
    "StepBudgetExceeded",
    "TelemetryEntry",
    "TelemetryRing",
    "TraceSpec",
    "TxOutcome",
    "TxStatusContext",
    "VerifierReport",
    "WorkloadSpec",
    "aggregate_stats",
    "airtime_us",
    "builtin_program",
    "constant_trace",
    "default_fallback_ladder",
    "default_scenario",
    "default_thresholds",
    "default_workload_suite",
    "emit_report",
    "execute",
    "expected_goodput_bps",
    "flow_metrics",
    "fresh_algo_state",
    "hold_retest_step",
    "iterate3_step",
    "linear_trace",
    "lint",
    "load_scenario",
    "make_controller",
    "minstrel_best",
    "minstrel_step",
    "oracle_best_mcs",
    "oracle_goodput_bps",
    "parse",
    "phy_rate_kbps",
    "QoEResult",
    "random_walk_trace",
    "run_ab_test",
    "run_workload",
    "scenario_from_dict",
    "scoring_noise_demo",
    "serve",
    "sinusoid_trace",
    "success_probability",
    "sweep_all_rates",
    "transmit_frame",
    "verify",
    "video_mos",
    "voip_mos",
]
