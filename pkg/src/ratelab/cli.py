"""Command-line surface: A/B runs, rate sweeps, the scoring-noise demo,
policy-program lint/deploy, single workload runs, and the daemon's socket
transport.

    ratelab [--seed N] [--scenario FILE] [--out DIR] [--format {json,csv}] CMD ...
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .controlplane import Daemon, DaemonServer
from .engine import PolicyEngine
from .harness import (
    ExperimentPlan,
    emit_report,
    run_ab_test,
    scoring_noise_demo,
    sweep_all_rates,
)
from .link import SimulatedLink
from .policyscript import lint as lint_program, parse as parse_program
from .policyscript.nodes import PolicyParseError
from .scenario import Scenario, ScenarioError, default_scenario, load_scenario
from .workloads import WorkloadSpec, run_workload


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ratelab",
        description="Simulated Wi-Fi rate-control lab: policy engine, "
                    "controllers, workloads and experiment harness.",
    )
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--scenario", type=Path, default=None,
                   help="scenario JSON file (see docs/scenarios.md)")
    p.add_argument("--out", type=Path, default=None,
                   help="output directory for report files")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="report file format")
    sub = p.add_subparsers(dest="command", required=True)

    ab = sub.add_parser("ab", help="paired A/B test across algorithms and workloads")
    ab.add_argument("--pairs", type=int, default=0,
                    help="override the scenario's pair count")
    ab.add_argument("--duration", type=float, default=0.0,
                    help="override per-sample duration (simulated seconds)")

    sw = sub.add_parser("sweep", help="round-robin rate sweep over MCS 0-7")
    sw.add_argument("--frames-per-rate", type=int, default=1)
    sw.add_argument("--cycles", type=int, default=16)

    dn = sub.add_parser("demo-noise",
                        help="show naive vs RSSI-normalized candidate scoring")
    dn.add_argument("--trials", type=int, default=200)

    dp = sub.add_parser("deploy", help="lint, verify and activate a policy program")
    dp.add_argument("program", type=Path, help="policy program source file")
    dp.add_argument("--name", default=None, help="program name (default: file stem)")

    ln = sub.add_parser("lint", help="lint a policy program")
    ln.add_argument("program", type=Path, help="policy program source file")

    rw = sub.add_parser("run-workload", help="run one workload over the scenario link")
    rw.add_argument("--kind", required=True,
                    choices=("peak-throughput", "file-download", "web-page",
                             "voip", "video"))
    rw.add_argument("--algorithm", default=None,
                    help="algorithm name from the scenario (default: first)")
    rw.add_argument("--deadline", type=float, default=600.0,
                    help="simulated-time deadline in seconds")

    sv = sub.add_parser("serve", help="serve the control daemon over a TCP socket")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=4711)
    sv.add_argument("--device", default="dev0")
    return p


def _load_scenario(args) -> Scenario:
    if args.scenario is None:
        return default_scenario()
    return load_scenario(args.scenario)


def _cmd_ab(args) -> int:
    scenario = _load_scenario(args)
    plan = ExperimentPlan(scenario=scenario, seed=args.seed,
                          pairs=args.pairs, sample_duration_s=args.duration)
    report = run_ab_test(plan)
    for kind in report.workload_kinds:
        for alg in report.algorithms:
            cell = report.results[kind][alg]
            med = cell["median"]
            med_s = "censored" if med is None else f"{med:.4g}"
            print(f"{kind:16s} {alg:12s} {cell['metric_name']}={med_s:>10s} "
                  f"normalized={cell['normalized']:.4f}")
    for alg in report.algorithms:
        print(f"overall {alg:12s} score={report.scores[alg]:.4f}")
    out = args.out or Path(".")
    for path in emit_report(report, args.format, out):
        print(f"wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    scenario = _load_scenario(args)
    engine = PolicyEngine()
    link = SimulatedLink(scenario.channel(args.seed), engine, None,
                         scenario.link, seed=args.seed)
    table = sweep_all_rates(link, args.frames_per_rate, cycles=args.cycles)
    print(f"{'mcs':>3s} {'frames':>6s} {'delivery':>8s} {'goodput':>10s} {'phy':>8s}")
    for m, row in sorted(table.items()):
        print(f"{m:3d} {row['frames']:6d} {row['delivery_ratio']:8.4f} "
              f"{row['goodput_mbps']:10.3f} {row['phy_rate_mbps']:8.1f}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "sweep.json"
        path.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")
    return 0


def _cmd_demo_noise(args) -> int:
    result = scoring_noise_demo(args.seed, trials=args.trials)
    print(f"true best candidate: {result['true_best']}")
    print(f"naive scorer pick error rate:      {result['naive_pick_error_rate']:.3f}")
    print(f"normalized scorer pick error rate: {result['normalized_pick_error_rate']:.3f}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "demo_noise.json"
        path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")
    return 0


def _cmd_deploy(args) -> int:
    source = args.program.read_text()
    name = args.name or args.program.stem
    daemon = Daemon("cli", seed=args.seed)
    ack = daemon.handle_command("rc/cli/deploy-policy",
                                {"name": name, "source": source})
    print(json.dumps(ack.to_json_dict(), indent=2, sort_keys=True))
    return 0 if ack.ok else 1


def _cmd_lint(args) -> int:
    source = args.program.read_text()
    try:
        ast = parse_program(source)
    except PolicyParseError as e:
        print(f"parse error: line {e.line}: {e.message}")
        return 1
    diags = lint_program(ast)
    for d in diags:
        print(f"{args.program}:{d.line}: rule {d.rule}: {d.message}")
    if diags:
        print(f"{len(diags)} diagnostic(s)")
        return 1
    print("clean")
    return 0


def _cmd_run_workload(args) -> int:
    scenario = _load_scenario(args)
    if args.algorithm is None:
        alg = scenario.algorithms[0]
    else:
        matches = [a for a in scenario.algorithms if a.name == args.algorithm]
        if not matches:
            names = ", ".join(a.name for a in scenario.algorithms)
            print(f"unknown algorithm {args.algorithm!r}; scenario has: {names}")
            return 1
        alg = matches[0]
    engine = PolicyEngine()
    link = SimulatedLink(scenario.channel(args.seed), engine,
                         alg.build(seed=args.seed), scenario.link, seed=args.seed)
    spec = WorkloadSpec.of_kind(args.kind)
    result = run_workload(link, spec, deadline_s=args.deadline)
    print(json.dumps(result.to_json_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    scenario = _load_scenario(args)
    daemon = Daemon(args.device, scenario=scenario, seed=args.seed)
    server = DaemonServer(daemon, host=args.host, port=args.port)
    print(f"serving device {args.device!r} on {args.host}:{server.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("stopped")
    finally:
        server.server_close()
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "ab": _cmd_ab,
        "sweep": _cmd_sweep,
        "demo-noise": _cmd_demo_noise,
        "deploy": _cmd_deploy,
        "lint": _cmd_lint,
        "run-workload": _cmd_run_workload,
        "serve": _cmd_serve,
    }[args.command]
    try:
        return handler(args)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
