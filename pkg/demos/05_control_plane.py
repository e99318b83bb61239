"""Drive a device daemon over the message bus, end to end.

Everything here goes through published messages — no direct method calls
on the daemon. The walk covers: a staged deploy that fails lint, a clean
deploy of the shipped ladder program, telemetry streaming while traffic
flows, a stats query, and a config session with persist/revert/teardown
semantics backed by the undo log.
"""
from __future__ import annotations

from ratelab.controlplane import ControlClient, Daemon, MessageBus
from ratelab.policyscript import ITERATE3_SOURCE

SLOPPY_PROGRAM = """\
state { cursor: u8; }
scratch idx: u32;
idx = ctx.mcs_used;
state.cursor = idx;
"""


def main() -> None:
    bus = MessageBus()
    daemon = Daemon("dev1", bus=bus, seed=4,
                    config={"region": "fcc", "power_dbm": 17},
                    telemetry_interval_s=0.25)
    client = ControlClient(bus, "dev1")

    print("== deploy pipeline ==")
    ack = client.request("deploy-policy", name="sloppy", source=SLOPPY_PROGRAM)
    err = ack["error"]
    print(f"  sloppy program rejected at stage '{err['stage']}':")
    for d in err["diagnostics"]:
        print(f"    rule {d['rule']} line {d['line']}: {d['message']}")

    ack = client.request("deploy-policy", name="ladder", source=ITERATE3_SOURCE)
    res = ack["result"]
    print(f"  shipped ladder program reached stage '{res['stage']}': "
          f"{res['instruction_estimate']} instructions, "
          f"{res['state_bytes']} state bytes")

    print("\n== telemetry stream ==")
    ticks: list[dict] = []
    bus.subscribe("rc/dev1/telemetry", lambda _t, p: ticks.append(p))
    client.request("enable-telemetry", interval_s=0.25)
    for _ in range(600):
        daemon.link.send_frame()
    total = sum(len(t["entries"]) for t in ticks)
    print(f"  {len(ticks)} ticks while traffic ran, {total} entries total; "
          f"first tick at t={ticks[0]['tick_s']:.2f} s "
          f"with {len(ticks[0]['entries'])} entries")

    ack = client.request("get-stats", wcid=daemon.link.config.wcid)
    row = ack["result"]["stations"][str(daemon.link.config.wcid)]
    print(f"  station stats: {row['tx_total']} tx, {row['tx_success']} ok, "
          f"ewma_per={row['ewma_per']}, last_mcs={row['last_mcs']}")

    print("\n== config session ==")
    client.request("config-set", key="power_dbm", value=20)
    client.request("config-set", key="channel", value=44)
    client.request("config-persist", key="channel")
    print(f"  after set+set+persist(channel): {daemon.config}")
    client.request("config-revert", key="power_dbm")
    print(f"  after revert(power_dbm):        {daemon.config}")
    client.request("config-set", key="power_dbm", value=23)
    ack = client.request("session-teardown")
    print(f"  teardown reverted {ack['result']['reverted']} entries: "
          f"{daemon.config}")
    print("  persisted keys survive teardown; everything else rolls back.")


if __name__ == "__main__":
    main()
