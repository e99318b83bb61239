"""Rate controllers: the iterate3 state machine, a Minstrel-style sampler,
a hold-and-retest baseline, and the registry that names them.

iterate3_step is a direct statement-for-statement port of the production
controller: an anti-collapse memory (last_good_mcs), a cooldown against
thrashing at MCS 5, a near-outage guard that pins the rate low until a streak
of clean low-rate deliveries, periodic re-probing of the last good rate, and
an absolute floor at MCS 3.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .records import AlgoState, TxStatusContext
from .phy import BW_HT20, GUARD_LONG, HT_RATE_KBPS, MCS_COUNT

BPF_MAX_STA = 128


@dataclass(frozen=True)
class IterateParams:
    """Tuning constants for iterate3_step (defaults are the shipped values)."""

    mcs_count: int = 8
    default_mcs: int = 4
    default_last_good: int = 3
    retest_period_mask: int = 15
    high_retry_thresh: int = 2
    very_high_retry: int = 3
    promote_streak_req: int = 4
    mcs5_cooldown_init: int = 6
    mid_cooldown_reduce: int = 2
    outage_guard_init: int = 10
    outage_exit_streak_req: int = 3


DEFAULT_PARAMS = IterateParams()


def fresh_algo_state(pre_satisfied_gate: bool = False) -> AlgoState:
    """Initial controller state. With pre_satisfied_gate the low-rate exit
    streak starts at the exit threshold, so a fresh state may leave MCS 3
    immediately instead of proving three clean deliveries first."""
    st = AlgoState()
    if pre_satisfied_gate:
        st.low_ok_streak = DEFAULT_PARAMS.outage_exit_streak_req
    return st


def iterate3_step(
    state: AlgoState,
    ctx: TxStatusContext,
    params: IterateParams = DEFAULT_PARAMS,
) -> tuple[AlgoState, int | None]:
    """One controller step. Returns (new state, chosen MCS), or the unchanged
    state and None for an out-of-range station id (a guarded no-op)."""
    if ctx.wcid == 0 or ctx.wcid >= BPF_MAX_STA:
        return state, None
    p = params

    def clamp(v: int, n: int) -> int:
        return v if v < n else n - 1

    cur = clamp(state.current_mcs, p.mcs_count)  # noqa: F841  (read, never used)
    last_good = clamp(state.last_good_mcs, p.mcs_count)
    used = clamp(ctx.mcs_used & 0xFF, p.mcs_count)

    recent_ok = state.recent_ok
    promote_streak = state.promote_streak
    mcs5_cooldown = state.mcs5_cooldown
    outage_guard = state.outage_guard
    low_ok_streak = state.low_ok_streak
    frames = (state.frame_count + 1) & 0xFFFFFFFF
    chosen = p.default_mcs

    success = ctx.success != 0
    retry = ctx.retry_count

    if success:
        recent_ok = 1
        if used >= p.default_last_good and retry <= 1:
            last_good = used
        chosen = max(last_good, p.default_mcs)
        if chosen > 5:
            chosen = 5
        if chosen == p.default_mcs:
            promote_streak = min(promote_streak + 1, 255) if retry == 0 else 0
            if mcs5_cooldown > 0 and retry == 0:
                mcs5_cooldown -= 1
            if mcs5_cooldown == 0 and promote_streak >= p.promote_streak_req:
                chosen = 5
        else:
            if retry > 0:
                promote_streak = 0
            if used >= 5 and retry >= 1:
                mcs5_cooldown = p.mid_cooldown_reduce
    else:
        recent_ok = 0
        promote_streak = 0
        chosen = last_good
        if used >= 5:
            chosen = p.default_mcs
            mcs5_cooldown = p.mcs5_cooldown_init
        elif used > 0 and used <= chosen:
            chosen = used - 1
        chosen = max(chosen, p.default_last_good)

    if retry >= p.very_high_retry:
        chosen = p.default_last_good
        promote_streak = 0
    elif retry >= p.high_retry_thresh and chosen > p.default_mcs:
        chosen = p.default_mcs
        promote_streak = 0

    # near-outage guard: a failure or retry storm at a mid/high rate pins the
    # controller low until it sees a streak of clean low-rate deliveries
    if used >= p.default_mcs and (not success or retry >= p.very_high_retry):
        outage_guard = p.outage_guard_init
        low_ok_streak = 0
    elif outage_guard > 0 and success and used <= p.default_last_good and retry == 0:
        low_ok_streak = min(low_ok_streak + 1, 255)
        outage_guard -= 1
    elif not success or retry > 0:
        low_ok_streak = 0

    # periodic re-probe of the remembered good rate while deliveries fail
    if (frames & p.retest_period_mask) == 0 and recent_ok == 0:
        chosen = last_good

    # enforcement
    if mcs5_cooldown > 0 and chosen >= 5:
        chosen = p.default_mcs
    if outage_guard > 0:
        chosen = p.default_last_good
        promote_streak = 0
    elif low_ok_streak < p.outage_exit_streak_req and chosen > p.default_last_good:
        chosen = p.default_last_good

    chosen = max(chosen, p.default_last_good)

    new_state = AlgoState(
        current_mcs=chosen,
        last_good_mcs=last_good,
        recent_ok=recent_ok,
        promote_streak=promote_streak,
        mcs5_cooldown=mcs5_cooldown,
        outage_guard=outage_guard,
        low_ok_streak=low_ok_streak,
        pad=state.pad,
        frame_count=frames,
    )
    return new_state, chosen


# ---------------------------------------------------------------------------
# Minstrel-style sampler


_RATE_TABLE = HT_RATE_KBPS[(BW_HT20, GUARD_LONG)]


@dataclass
class MinstrelState:
    """Windowed per-rate statistics with EWMA folding and periodic sampling."""

    update_interval: int = 100
    ewma_alpha: float = 0.25
    sample_period: int = 10
    ewma_prob: list[float] = field(default_factory=lambda: [1.0] * MCS_COUNT)
    window_attempts: list[int] = field(default_factory=lambda: [0] * MCS_COUNT)
    window_success: list[int] = field(default_factory=lambda: [0] * MCS_COUNT)
    best: int = MCS_COUNT - 1
    frames_in_window: int = 0
    sample_countdown: int = 10
    rng: random.Random = field(default_factory=lambda: random.Random(0))


def minstrel_best(ewma_prob: list[float]) -> int:
    """argmax of phy_rate * success probability; ties go to the lower MCS."""
    best, best_score = 0, -1.0
    for m in range(MCS_COUNT):
        score = _RATE_TABLE[m] * ewma_prob[m]
        if score > best_score:
            best, best_score = m, score
    return best


def minstrel_step(state: MinstrelState, ctx: TxStatusContext) -> tuple[MinstrelState, int]:
    """Account one completion and choose the next rate.

    A frame counts as a success for its configured rate only when it was
    delivered on the first attempt, so the window ratio estimates the
    per-attempt delivery probability. Every update_interval frames the window
    folds into the EWMA and the best rate is recomputed. Exactly one frame in
    sample_period (a deterministic countdown, not a per-frame coin flip) is
    spent sampling a uniformly chosen non-best rate.
    """
    mcs = ctx.mcs_used & 0xFF
    if mcs < MCS_COUNT:
        state.window_attempts[mcs] += 1
        if ctx.success and ctx.retry_count == 0:
            state.window_success[mcs] += 1

    state.frames_in_window += 1
    if state.frames_in_window >= state.update_interval:
        a = state.ewma_alpha
        for m in range(MCS_COUNT):
            if state.window_attempts[m] > 0:
                ratio = state.window_success[m] / state.window_attempts[m]
                state.ewma_prob[m] += a * (ratio - state.ewma_prob[m])
            state.window_attempts[m] = 0
            state.window_success[m] = 0
        state.best = minstrel_best(state.ewma_prob)
        state.frames_in_window = 0

    state.sample_countdown -= 1
    if state.sample_countdown <= 0:
        state.sample_countdown = state.sample_period
        others = [m for m in range(MCS_COUNT) if m != state.best]
        return state, state.rng.choice(others)
    return state, state.best


# ---------------------------------------------------------------------------
# Hold-and-retest baseline


@dataclass
class HoldRetestState:
    frame_count: int = 0


def hold_retest_step(
    state: HoldRetestState,
    ctx: TxStatusContext,
    held: int,
    retest_mask: int = 16383,
) -> tuple[HoldRetestState, int]:
    """Hold a fixed rate; periodically probe one step above it.

    Probes happen when (frame_count & retest_mask) == 0; probe results never
    promote the held rate, so the controller returns to it on the next frame.
    A mask of 0 probes every frame (degenerate but legal).
    """
    state.frame_count = (state.frame_count + 1) & 0xFFFFFFFF
    if (state.frame_count & retest_mask) == 0:
        return state, min(held + 1, MCS_COUNT - 1)
    return state, held


# ---------------------------------------------------------------------------
# Controller classes (per-station state, engine integration)


class RateController:
    """Interface: consume one TxStatusContext, return the next MCS or None."""

    name = "controller"

    def on_tx_status(self, ctx: TxStatusContext, engine=None) -> int | None:
        raise NotImplementedError


class Iterate3Controller(RateController):
    """iterate3 with state kept in the engine's algorithm map when available,
    so map swaps reset it exactly like a real map replacement would."""

    name = "iterate3"

    def __init__(self, params: IterateParams = DEFAULT_PARAMS, pre_satisfied_gate: bool = False):
        self.params = params
        self.pre_satisfied_gate = pre_satisfied_gate
        self._local: dict[int, bytes] = {}

    def _load(self, wcid: int, engine) -> AlgoState:
        blob = engine.algo_map[wcid] if engine is not None else self._local.get(wcid, b"")
        if len(blob) != AlgoState.SIZE:
            return fresh_algo_state(self.pre_satisfied_gate)
        return AlgoState.unpack(blob)

    def _store(self, wcid: int, state: AlgoState, engine) -> None:
        blob = state.pack()
        if engine is not None:
            engine.write_algo_state(wcid, blob)
        else:
            self._local[wcid] = blob

    def on_tx_status(self, ctx: TxStatusContext, engine=None) -> int | None:
        if ctx.wcid == 0 or ctx.wcid >= BPF_MAX_STA:
            return None
        state = self._load(ctx.wcid, engine)
        new_state, chosen = iterate3_step(state, ctx, self.params)
        self._store(ctx.wcid, new_state, engine)
        return chosen


class MinstrelController(RateController):
    name = "minstrel"

    def __init__(self, seed: int = 0, update_interval: int = 100, ewma_alpha: float = 0.25):
        self.seed = seed
        self.update_interval = update_interval
        self.ewma_alpha = ewma_alpha
        self.stations: dict[int, MinstrelState] = {}

    def state_for(self, wcid: int) -> MinstrelState:
        if wcid not in self.stations:
            self.stations[wcid] = MinstrelState(
                update_interval=self.update_interval,
                ewma_alpha=self.ewma_alpha,
                rng=random.Random((self.seed << 8) ^ wcid),
            )
        return self.stations[wcid]

    def on_tx_status(self, ctx: TxStatusContext, engine=None) -> int | None:
        if ctx.wcid == 0 or ctx.wcid >= BPF_MAX_STA:
            return None
        state = self.state_for(ctx.wcid)
        _, chosen = minstrel_step(state, ctx)
        return chosen


class HoldRetestController(RateController):
    name = "hold-retest"

    def __init__(self, held: int = 4, retest_mask: int = 16383):
        if not 0 <= held < MCS_COUNT:
            raise ValueError(f"held rate out of range: {held}")
        self.held = held
        self.retest_mask = retest_mask
        self.stations: dict[int, HoldRetestState] = {}

    def on_tx_status(self, ctx: TxStatusContext, engine=None) -> int | None:
        if ctx.wcid == 0 or ctx.wcid >= BPF_MAX_STA:
            return None
        state = self.stations.setdefault(ctx.wcid, HoldRetestState())
        _, chosen = hold_retest_step(state, ctx, self.held, self.retest_mask)
        return chosen


class FixedController(RateController):
    """Degenerate controller that always picks one MCS (A/B baseline)."""

    name = "fixed"

    def __init__(self, mcs: int):
        if not 0 <= mcs < MCS_COUNT:
            raise ValueError(f"mcs out of range: {mcs}")
        self.mcs = mcs

    def on_tx_status(self, ctx: TxStatusContext, engine=None) -> int | None:
        return self.mcs


class ProgramController(RateController):
    """Runs a verified policy program; per-station state lives in the engine's
    algorithm map (or a local shadow when no engine is given). A step-budget
    abort is treated as a no-op: state and rate stay as they were."""

    def __init__(self, program_id: str, ast):
        from .policyscript.interp import execute, StepBudgetExceeded

        self.name = program_id
        self.ast = ast
        self._execute = execute
        self._budget_error = StepBudgetExceeded
        self._local: dict[int, bytes] = {}

    def _load(self, wcid: int, engine) -> bytes:
        blob = engine.algo_map[wcid] if engine is not None else self._local.get(wcid, b"")
        if len(blob) != self.ast.state_size:
            blob = bytes(self.ast.state_size)
        return blob

    def _store(self, wcid: int, blob: bytes, engine) -> None:
        if engine is not None:
            engine.write_algo_state(wcid, blob)
        else:
            self._local[wcid] = blob

    def on_tx_status(self, ctx: TxStatusContext, engine=None) -> int | None:
        if ctx.wcid == 0 or ctx.wcid >= BPF_MAX_STA:
            return None
        blob = self._load(ctx.wcid, engine)
        try:
            new_blob, chosen = self._execute(self.ast, blob, ctx)
        except self._budget_error:
            return None
        self._store(ctx.wcid, new_blob, engine)
        return chosen


def make_controller(name: str, **kwargs) -> RateController:
    """Registry lookup by controller id."""
    if name == "iterate3":
        return Iterate3Controller(**kwargs)
    if name == "minstrel":
        return MinstrelController(**kwargs)
    if name == "hold-retest":
        return HoldRetestController(**kwargs)
    if name == "fixed":
        return FixedController(**kwargs)
    raise KeyError(f"unknown controller: {name!r}")
