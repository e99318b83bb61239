"""Control plane: a topic-based message bus, a device daemon exposing rate
control over 15 command verbs, periodic telemetry/stats streams, and an undo
log that makes configuration sessions revertible.

Topic layout: commands arrive on "rc/<device>/<verb>"; acks go to the
command's reply_to topic (default "rc/<device>/ack"); telemetry and stats
stream on "rc/<device>/telemetry" and "rc/<device>/stats". Stream payloads
never ride inside command acks.
"""
from __future__ import annotations

import base64
import itertools
import json
import socketserver
import threading
from dataclasses import dataclass

from .controllers import ProgramController
from .engine import (
    EngineError,
    FixedPolicy,
    FrameTypePolicy,
    PerStationPolicy,
    PolicyEngine,
    ProgramPolicy,
    RoundRobinPolicy,
)
from .link import SimulatedLink
from .phy import RateSpec
from .records import BW_HT20, BW_HT40, GUARD_LONG, GUARD_SHORT, RateMapEntry
from .scenario import Scenario, default_scenario
from .telemetry import aggregate_stats
from .policyscript import lint, parse, verify
from .policyscript.nodes import PolicyParseError
from .workloads import WorkloadSpec, run_workload

VERBS = (
    "set-policy",
    "set-rate",
    "write-rate-map",
    "read-map",
    "deploy-policy",
    "detach-policy",
    "enable-telemetry",
    "disable-telemetry",
    "get-stats",
    "config-set",
    "config-revert",
    "config-persist",
    "start-workload",
    "stop-workload",
    "session-teardown",
)

VERIFIER_LOG_LIMIT = 3072

_MISSING = object()


class MessageBus:
    """In-process synchronous pub/sub with exact topics and a trailing '#'
    wildcard (e.g. "rc/dev1/#")."""

    def __init__(self):
        self._subs: list[tuple[str, object]] = []
        self._lock = threading.Lock()

    def subscribe(self, pattern: str, fn) -> None:
        with self._lock:
            self._subs.append((pattern, fn))

    def unsubscribe(self, fn) -> None:
        with self._lock:
            self._subs = [(p, f) for p, f in self._subs if f is not fn]

    def publish(self, topic: str, payload: dict) -> int:
        with self._lock:
            subs = list(self._subs)
        hit = 0
        for pattern, fn in subs:
            if pattern.endswith("/#"):
                if topic.startswith(pattern[:-1]) or topic == pattern[:-2]:
                    fn(topic, payload)
                    hit += 1
            elif pattern == topic:
                fn(topic, payload)
                hit += 1
        return hit


@dataclass
class Ack:
    correlation_id: str
    ok: bool
    result: dict | None = None
    error: dict | None = None
    verifier_log: str | None = None

    def to_json_dict(self) -> dict:
        d = {"correlation_id": self.correlation_id, "ok": self.ok}
        if self.ok:
            d["result"] = self.result if self.result is not None else {}
        else:
            d["error"] = self.error if self.error is not None else {"message": "error"}
        if self.verifier_log is not None:
            d["verifier_log"] = self.verifier_log[:VERIFIER_LOG_LIMIT]
        return d


class _CommandError(Exception):
    def __init__(self, message: str, **extra):
        super().__init__(message)
        self.message = message
        self.extra = extra


def _parse_rate(d: dict) -> RateSpec:
    if not isinstance(d, dict):
        raise _CommandError(f"rate must be an object, got {type(d).__name__}")
    bw = {"HT20": BW_HT20, "HT40": BW_HT40}.get(d.get("bandwidth", "HT20"))
    guard = {"long": GUARD_LONG, "short": GUARD_SHORT}.get(d.get("guard", "long"))
    if bw is None:
        raise _CommandError(f"bad bandwidth: {d.get('bandwidth')!r}")
    if guard is None:
        raise _CommandError(f"bad guard: {d.get('guard')!r}")
    try:
        return RateSpec(mcs=d.get("mcs", 0), bandwidth=bw, guard=guard,
                        phy=d.get("phy", "HT"))
    except ValueError as e:
        raise _CommandError(str(e)) from None


@dataclass
class _UndoEntry:
    key: str
    prior: object  # _MISSING when the key did not exist


class Daemon:
    """One simulated device bound to a bus: engine, link, config store,
    deploy pipeline, streams and undo log."""

    def __init__(
        self,
        device_id: str,
        scenario: Scenario | None = None,
        bus: MessageBus | None = None,
        seed: int = 0,
        config: dict | None = None,
        telemetry_interval_s: float = 1.0,
        stats_interval_s: float = 5.0,
    ):
        self.device_id = device_id
        self.scenario = scenario or default_scenario()
        self.bus = bus or MessageBus()
        self.seed = seed
        self.engine = PolicyEngine()
        self.link = SimulatedLink(
            channel=self.scenario.channel(seed),
            engine=self.engine,
            controller=None,
            config=self.scenario.link,
            seed=seed,
        )
        self.link.frame_hook = self._on_frame

        self.config = dict(config) if config else {}
        self._undo_log: list[_UndoEntry] = []
        self.programs: dict[str, object] = {}

        self.telemetry_enabled = True
        self.telemetry_interval_s = telemetry_interval_s
        self.stats_interval_s = stats_interval_s
        self._next_telemetry_t = telemetry_interval_s
        self._next_stats_t = stats_interval_s
        self._stats_window = []
        self._cid_counter = itertools.count(1)
        self._workload_active = False

        for verb in VERBS:
            self.bus.subscribe(f"rc/{device_id}/{verb}", self._on_command_message)

    # -- streaming -------------------------------------------------------

    def _on_frame(self, link: SimulatedLink) -> None:
        now = link.clock_s
        if now >= self._next_telemetry_t:
            entries = self._drain_ring()
            if self.telemetry_enabled:
                self.bus.publish(f"rc/{self.device_id}/telemetry", {
                    "device": self.device_id,
                    "tick_s": self._next_telemetry_t,
                    "entries": [e.to_json_dict() for e in entries],
                })
            self._next_telemetry_t = max(self._next_telemetry_t + self.telemetry_interval_s,
                                         now)
        if now >= self._next_stats_t:
            self._drain_ring()
            self.bus.publish(f"rc/{self.device_id}/stats", {
                "device": self.device_id,
                "tick_s": self._next_stats_t,
                "stations": aggregate_stats(self._stats_window),
            })
            self._stats_window = []
            self._next_stats_t = max(self._next_stats_t + self.stats_interval_s, now)

    def _drain_ring(self):
        entries = self.engine.telemetry.snapshot_read()
        self._stats_window.extend(entries)
        return entries

    # -- command dispatch ---------------------------------------------------

    def _on_command_message(self, topic: str, payload) -> None:
        ack = self.handle_command(topic, payload)
        reply_to = f"rc/{self.device_id}/ack"
        if isinstance(payload, dict) and isinstance(payload.get("reply_to"), str):
            reply_to = payload["reply_to"]
        self.bus.publish(reply_to, ack.to_json_dict())

    def handle_command(self, topic: str, payload) -> Ack:
        """Process one command; always returns exactly one structured Ack."""
        cid = ""
        if isinstance(payload, dict):
            cid = str(payload.get("correlation_id", ""))
        if not cid:
            cid = f"gen-{next(self._cid_counter)}"
        parts = topic.split("/")
        if len(parts) != 3 or parts[0] != "rc":
            return Ack(cid, False, error={"message": f"malformed topic: {topic!r}"})
        _, device, verb = parts
        if device != self.device_id:
            return Ack(cid, False, error={"message": f"wrong device: {device!r}"})
        if verb not in VERBS:
            return Ack(cid, False, error={"message": f"unknown-topic: {verb!r}"})
        if not isinstance(payload, dict):
            return Ack(cid, False, error={"message": "bad-payload: expected an object"})
        handler = getattr(self, "_cmd_" + verb.replace("-", "_"))
        try:
            result = handler(payload)
            if isinstance(result, Ack):
                result.correlation_id = cid
                return result
            return Ack(cid, True, result=result)
        except _CommandError as e:
            return Ack(cid, False, error={"message": e.message, **e.extra})
        except (EngineError, PolicyParseError, ValueError, KeyError, TypeError) as e:
            return Ack(cid, False, error={"message": str(e) or type(e).__name__})

    # -- policy / rate verbs ----------------------------------------------

    def _cmd_set_policy(self, p: dict) -> dict:
        mode_name = p.get("mode")
        if mode_name == "fixed":
            mode = FixedPolicy(_parse_rate(p.get("rate", {"mcs": p.get("mcs", 0)})))
        elif mode_name == "per-station":
            overrides = {}
            for k, v in p.get("overrides", {}).items():
                overrides[int(k)] = _parse_rate(v)
            mode = PerStationPolicy.of(overrides, _parse_rate(p.get("default", {"mcs": 0})))
        elif mode_name == "round-robin":
            rates = []
            for r in p.get("rates", []):
                rates.append(_parse_rate(r) if isinstance(r, dict) else RateSpec(mcs=int(r)))
            if not rates:
                raise _CommandError("round-robin needs a non-empty 'rates' list")
            mode = RoundRobinPolicy(tuple(rates), int(p.get("frames_per_rate", 1)))
        elif mode_name == "frame-type":
            defaults = FrameTypePolicy()
            mode = FrameTypePolicy(
                mgmt=_parse_rate(p["mgmt"]) if "mgmt" in p else defaults.mgmt,
                ctrl=_parse_rate(p["ctrl"]) if "ctrl" in p else defaults.ctrl,
                data=_parse_rate(p["data"]) if "data" in p else defaults.data,
            )
        elif mode_name == "program":
            mode = ProgramPolicy(self.engine.attached_program or "")
        else:
            raise _CommandError(f"unknown mode: {mode_name!r}")
        self.engine.set_policy(mode)
        return {"mode": mode_name, "rate_generation": self.engine.rate_generation}

    def _cmd_set_rate(self, p: dict) -> dict:
        rate = _parse_rate(p.get("rate", {"mcs": p.get("mcs", 0)}))
        self.engine.set_policy(FixedPolicy(rate))
        return {"mode": "fixed", "mcs": rate.mcs,
                "rate_generation": self.engine.rate_generation}

    def _cmd_write_rate_map(self, p: dict) -> dict:
        wcid = p.get("wcid")
        if not isinstance(wcid, int):
            raise _CommandError("wcid must be an integer")
        if "entry_b64" in p:
            raw = base64.b64decode(p["entry_b64"])
            if len(raw) != RateMapEntry.SIZE:
                raise _CommandError(f"entry must be {RateMapEntry.SIZE} bytes")
            entry = RateMapEntry.unpack(raw)
        else:
            e = p.get("entry")
            if not isinstance(e, dict):
                raise _CommandError("need 'entry' object or 'entry_b64'")
            rate = _parse_rate(e)
            entry = RateMapEntry(
                mcs=rate.mcs, streams=rate.streams, bandwidth=rate.bandwidth,
                guard=rate.guard, phy_mode=rate.flags, valid=e.get("valid", 1))
        self.engine.write_rate_map(wcid, entry)
        return {"wcid": wcid, "entry_b64": base64.b64encode(entry.pack()).decode()}

    def _cmd_read_map(self, p: dict) -> dict:
        which = p.get("map", "rate")
        wcid = p.get("wcid")
        data = self.engine.map_bytes(which, wcid)
        return {"map": which, "wcid": wcid,
                "data_b64": base64.b64encode(data).decode()}

    # -- deploy pipeline -------------------------------------------------------

    def _cmd_deploy_policy(self, p: dict) -> Ack:
        name = p.get("name")
        source = p.get("source")
        if not isinstance(name, str) or not name:
            raise _CommandError("deploy needs a program 'name'")
        if not isinstance(source, str):
            raise _CommandError("deploy needs program 'source' text")
        try:
            ast = parse(source)
        except PolicyParseError as e:
            return Ack("", False, error={
                "stage": "parse", "message": e.message, "line": e.line})
        diags = lint(ast)
        if diags:
            return Ack("", False, error={
                "stage": "lint",
                "message": f"{len(diags)} lint diagnostics",
                "diagnostics": [
                    {"rule": d.rule, "line": d.line, "message": d.message} for d in diags
                ],
            })
        report = verify(ast)
        if not report.ok:
            return Ack("", False,
                       error={"stage": "verify", "message": "verifier rejected program"},
                       verifier_log=report.log)
        # activate: idempotent state-map init, attach, switch mode, bind controller
        for wcid in range(len(self.engine.algo_map)):
            if len(self.engine.algo_map[wcid]) != ast.state_size:
                self.engine.algo_map[wcid] = bytes(ast.state_size)
        self.programs[name] = ast
        self.engine.attach_program(name)
        self.engine.set_policy(ProgramPolicy(name))
        self.link.controller = ProgramController(name, ast)
        return Ack("", True, result={
            "stage": "activate",
            "name": name,
            "instruction_estimate": report.instruction_estimate,
            "state_bytes": report.state_bytes,
        }, verifier_log=report.log)

    def _cmd_detach_policy(self, p: dict) -> dict:
        was = self.engine.attached_program
        self.engine.detach_program()
        self.link.controller = None
        if isinstance(self.engine.mode, ProgramPolicy):
            self.engine.set_policy(FixedPolicy(self.engine.default_program_rate))
        return {"detached": was}

    # -- telemetry / stats -----------------------------------------------------

    def _cmd_enable_telemetry(self, p: dict) -> dict:
        self.telemetry_enabled = True
        if "interval_s" in p:
            iv = float(p["interval_s"])
            if iv <= 0:
                raise _CommandError("interval_s must be positive")
            self.telemetry_interval_s = iv
            self._next_telemetry_t = self.link.clock_s + iv
        return {"telemetry": "enabled", "interval_s": self.telemetry_interval_s}

    def _cmd_disable_telemetry(self, p: dict) -> dict:
        self.telemetry_enabled = False
        return {"telemetry": "disabled"}

    def _cmd_get_stats(self, p: dict) -> dict:
        wcid = p.get("wcid")
        stations = {}
        for w, entry in enumerate(self.engine.stats_map):
            if wcid is not None and w != wcid:
                continue
            if entry.tx_total == 0 and wcid is None:
                continue
            stations[str(w)] = {
                "tx_total": entry.tx_total,
                "tx_success": entry.tx_success,
                "tx_retries": entry.tx_retries,
                "ewma_per": entry.ewma_per,
                "signal": entry.signal,
                "ack_signal": entry.ack_signal,
                "last_mcs": entry.last_mcs,
                "flush_count": entry.flush_count,
            }
        return {"stations": stations}

    # -- config / undo -----------------------------------------------------------

    def _cmd_config_set(self, p: dict) -> dict:
        key = p.get("key")
        if not isinstance(key, str) or not key:
            raise _CommandError("config-set needs a string 'key'")
        if "value" not in p:
            raise _CommandError("config-set needs a 'value'")
        self._undo_log.append(_UndoEntry(key, self.config.get(key, _MISSING)))
        self.config[key] = p["value"]
        return {"key": key, "value": p["value"], "undo_depth": len(self._undo_log)}

    def _cmd_config_persist(self, p: dict) -> dict:
        key = p.get("key")
        if not isinstance(key, str) or not key:
            raise _CommandError("config-persist needs a string 'key'")
        before = len(self._undo_log)
        self._undo_log = [e for e in self._undo_log if e.key != key]
        return {"key": key, "dropped_undo_entries": before - len(self._undo_log)}

    def _cmd_config_revert(self, p: dict) -> dict:
        key = p.get("key")
        if not isinstance(key, str) or not key:
            raise _CommandError("config-revert needs a string 'key'")
        reverted = False
        for e in reversed(self._undo_log):
            if e.key == key:
                self._apply_undo(e)
                reverted = True
        self._undo_log = [e for e in self._undo_log if e.key != key]
        return {"key": key, "reverted": reverted,
                "value": self.config.get(key)}

    def _apply_undo(self, e: _UndoEntry) -> None:
        if e.prior is _MISSING:
            self.config.pop(e.key, None)
        else:
            self.config[e.key] = e.prior

    def _cmd_session_teardown(self, p: dict) -> dict:
        n = len(self._undo_log)
        for e in reversed(self._undo_log):
            self._apply_undo(e)
        self._undo_log = []
        return {"reverted": n}

    # -- workloads ----------------------------------------------------------------

    def _cmd_start_workload(self, p: dict) -> dict:
        kind = p.get("kind")
        if not isinstance(kind, str):
            raise _CommandError("start-workload needs a 'kind'")
        params = {k: v for k, v in p.items()
                  if k not in ("kind", "correlation_id", "reply_to", "deadline_s")}
        try:
            spec = WorkloadSpec.of_kind(kind, **params)
        except (ValueError, TypeError) as e:
            raise _CommandError(str(e)) from None
        deadline = float(p.get("deadline_s", 600.0))
        self._workload_active = True
        try:
            result = run_workload(self.link, spec, deadline_s=deadline)
        finally:
            self._workload_active = False
        return {"workload": kind, "qoe": result.to_json_dict()}

    def _cmd_stop_workload(self, p: dict) -> dict:
        # runs are synchronous in virtual time, so nothing is ever in flight
        return {"active": self._workload_active}


class ControlClient:
    """Convenience requester: publishes commands and collects matching acks."""

    def __init__(self, bus: MessageBus, device_id: str):
        self.bus = bus
        self.device_id = device_id
        self._acks: dict[str, dict] = {}
        self._counter = itertools.count(1)
        bus.subscribe(f"rc/{device_id}/ack", self._on_ack)

    def _on_ack(self, topic: str, payload: dict) -> None:
        self._acks[payload.get("correlation_id", "")] = payload

    def request(self, verb: str, **payload) -> dict:
        cid = f"c{next(self._counter)}"
        payload["correlation_id"] = cid
        self.bus.publish(f"rc/{self.device_id}/{verb}", payload)
        ack = self._acks.pop(cid, None)
        if ack is None:
            raise RuntimeError(f"no ack for {verb} (cid {cid})")
        return ack


# ---------------------------------------------------------------------------
# Line-delimited JSON socket transport


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        daemon: Daemon = self.server.daemon  # type: ignore[attr-defined]
        wlock = threading.Lock()

        def forward(topic: str, payload: dict) -> None:
            line = json.dumps({"topic": topic, "payload": payload},
                              sort_keys=True) + "\n"
            try:
                with wlock:
                    self.wfile.write(line.encode())
                    self.wfile.flush()
            except (BrokenPipeError, OSError):
                pass

        daemon.bus.subscribe(f"rc/{daemon.device_id}/telemetry", forward)
        daemon.bus.subscribe(f"rc/{daemon.device_id}/stats", forward)
        try:
            for raw in self.rfile:
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    msg = json.loads(raw)
                    topic = msg["topic"]
                    payload = msg.get("payload", {})
                except (json.JSONDecodeError, KeyError, TypeError):
                    err = {"ok": False, "error": {"message": "bad request line"}}
                    with wlock:
                        self.wfile.write((json.dumps(err) + "\n").encode())
                        self.wfile.flush()
                    continue
                ack = daemon.handle_command(topic, payload)
                line = json.dumps({"ack": ack.to_json_dict()}, sort_keys=True) + "\n"
                with wlock:
                    self.wfile.write(line.encode())
                    self.wfile.flush()
        finally:
            daemon.bus.unsubscribe(forward)


class DaemonServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, daemon: Daemon, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _LineHandler)
        self.daemon = daemon

    @property
    def port(self) -> int:
        return self.server_address[1]


def serve(daemon: Daemon, host: str = "127.0.0.1", port: int = 0,
          ready_event: threading.Event | None = None) -> DaemonServer:
    """Start the socket transport in a background thread; returns the server."""
    server = DaemonServer(daemon, host, port)
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    if ready_event is not None:
        ready_event.set()
    return server
