"""Built-in policy programs shipped with the package."""
from __future__ import annotations

# DSL port of the iterate3 controller. State layout matches the packed
# AlgoState record byte for byte: s[0] current_mcs, s[1] last_good_mcs,
# s[2] recent_ok, s[3] promote_streak, s[4] mcs5_cooldown, s[5] outage_guard,
# s[6] low_ok_streak, s[7] pad, s[8..11] frame_count (u32 little-endian).
ITERATE3_SOURCE = """\
// iterate3: anti-collapse rate controller over a 12-byte per-station state
state s[12];

var wcid = ctx.wcid;
if (wcid == 0) { return; }
if (wcid >= 128) { return; }

var cur = clamp(s[0], 8);
var last_good = clamp(s[1], 8);
var used = clamp(ctx.mcs_used & 255, 8);

var recent_ok = s[2];
var promote_streak = s[3];
var mcs5_cooldown = s[4];
var outage_guard = s[5];
var low_ok_streak = s[6];
var frames = (s[8] + (s[9] << 8) + (s[10] << 16) + (s[11] << 24) + 1) & 4294967295;
var chosen = 4;

var success = ctx.success;
var retry = ctx.retry_count;

if (success != 0) {
    recent_ok = 1;
    if (used >= 3 && retry <= 1) { last_good = used; }
    chosen = max(last_good, 4);
    if (chosen > 5) { chosen = 5; }
    if (chosen == 4) {
        if (retry == 0) { promote_streak = min(promote_streak + 1, 255); }
        else { promote_streak = 0; }
        if (mcs5_cooldown > 0 && retry == 0) { mcs5_cooldown = mcs5_cooldown - 1; }
        if (mcs5_cooldown == 0 && promote_streak >= 4) { chosen = 5; }
    } else {
        if (retry > 0) { promote_streak = 0; }
        if (used >= 5 && retry >= 1) { mcs5_cooldown = 2; }
    }
} else {
    recent_ok = 0;
    promote_streak = 0;
    chosen = last_good;
    if (used >= 5) {
        chosen = 4;
        mcs5_cooldown = 6;
    } else if (used > 0 && used <= chosen) {
        chosen = used - 1;
    }
    chosen = max(chosen, 3);
}

if (retry >= 3) {
    chosen = 3;
    promote_streak = 0;
} else if (retry >= 2 && chosen > 4) {
    chosen = 4;
    promote_streak = 0;
}

// near-outage guard
if (used >= 4 && (success == 0 || retry >= 3)) {
    outage_guard = 10;
    low_ok_streak = 0;
} else if (outage_guard > 0 && success != 0 && used <= 3 && retry == 0) {
    low_ok_streak = min(low_ok_streak + 1, 255);
    outage_guard = outage_guard - 1;
} else if (success == 0 || retry > 0) {
    low_ok_streak = 0;
}

// periodic re-probe of the remembered good rate
if ((frames & 15) == 0 && recent_ok == 0) { chosen = last_good; }

// enforcement
if (mcs5_cooldown > 0 && chosen >= 5) { chosen = 4; }
if (outage_guard > 0) {
    chosen = 3;
    promote_streak = 0;
} else if (low_ok_streak < 3 && chosen > 3) {
    chosen = 3;
}

chosen = max(chosen, 3);

s[0] = chosen;
s[1] = last_good;
s[2] = recent_ok;
s[3] = promote_streak;
s[4] = mcs5_cooldown;
s[5] = outage_guard;
s[6] = low_ok_streak;
s[8] = frames;
s[9] = frames >> 8;
s[10] = frames >> 16;
s[11] = frames >> 24;

write_rate(chosen);
"""

_BUILTINS = {"iterate3": ITERATE3_SOURCE}


def builtin_program(name: str) -> str:
    """Source text of a shipped policy program."""
    return _BUILTINS[name]
