"""Simulated station link: the per-frame orchestration loop.

Each frame: resolve the rate through the policy engine, transmit through the
channel model with hardware fallback, report the received signal, account the
completion (stats, telemetry, controller context), let the attached controller
pick the next rate, and advance the virtual clock by the spent airtime.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .controllers import RateController
from .engine import PolicyEngine, ProgramPolicy, rate_to_entry
from .phy import (
    ChannelModel,
    DEFAULT_FRAME_OVERHEAD_US,
    DEFAULT_RETRY_LIMIT,
    RateSpec,
    TxOutcome,
    default_fallback_ladder,
    transmit_frame,
)
from .records import TxStatusContext


@dataclass
class LinkConfig:
    wcid: int = 1
    retry_limit: int = DEFAULT_RETRY_LIMIT
    payload_bytes: int = 1500
    overhead_us: float = DEFAULT_FRAME_OVERHEAD_US
    queue_capacity: int = 128


class SimulatedLink:
    """One station talking through a channel under a policy engine."""

    def __init__(
        self,
        channel: ChannelModel,
        engine: PolicyEngine,
        controller: RateController | None = None,
        config: LinkConfig | None = None,
        seed: int = 0,
    ):
        self.channel = channel
        self.engine = engine
        self.controller = controller
        self.config = config or LinkConfig()
        if controller is not None:
            # a bound controller drives rates through the shared rate map, the
            # way an attached datapath program does
            engine.attach_program(getattr(controller, "name", "controller"))
            engine.set_policy(ProgramPolicy(engine.attached_program))
        self.rng = random.Random(seed)
        self.clock_s = 0.0
        self.frames_sent = 0
        self.frames_delivered = 0
        self.airtime_by_mcs: dict[int, float] = {}
        self.delivered_bits_by_mcs: dict[int, int] = {}
        self.frame_hook = None  # called as frame_hook(link) after each frame

    def send_frame(
        self,
        payload_bytes: int | None = None,
        frame_type: str = "data",
    ) -> tuple[TxOutcome, TxStatusContext]:
        """Send one frame at the engine-resolved rate; returns the hardware
        outcome and the controller context that was generated for it."""
        cfg = self.config
        size = cfg.payload_bytes if payload_bytes is None else payload_bytes
        now = self.clock_s

        rssi = self.channel.rssi_at(now)
        self.engine.note_signal(cfg.wcid, rssi)
        configured = self.engine.get_rate(cfg.wcid, frame_type)
        ladder = default_fallback_ladder(configured)
        outcome = transmit_frame(
            self.channel, now, configured, cfg.retry_limit, ladder,
            self.rng, frame_bytes=size, overhead_us=cfg.overhead_us,
        )
        self.clock_s += outcome.airtime_us * 1e-6
        ctx = self.engine.on_tx_completion(
            cfg.wcid, outcome, configured, size, self.clock_s)

        if self.controller is not None:
            chosen = self.controller.on_tx_status(ctx, self.engine)
            if chosen is not None:
                self.engine.write_rate_map(cfg.wcid, rate_to_entry(
                    RateSpec(mcs=chosen, bandwidth=configured.bandwidth,
                             guard=configured.guard)))

        self.frames_sent += 1
        m = configured.mcs
        self.airtime_by_mcs[m] = self.airtime_by_mcs.get(m, 0.0) + outcome.airtime_us
        if outcome.success:
            self.frames_delivered += 1
            self.delivered_bits_by_mcs[m] = self.delivered_bits_by_mcs.get(m, 0) + size * 8
        if self.frame_hook is not None:
            self.frame_hook(self)
        return outcome, ctx

    def idle_until(self, t_s: float) -> None:
        """Advance the virtual clock to t_s if the link is idle before then."""
        if t_s > self.clock_s:
            self.clock_s = t_s
            if self.frame_hook is not None:
                self.frame_hook(self)
