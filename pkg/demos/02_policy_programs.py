"""Take a policy program through lint, verification, and execution.

The shipped controller also exists as a program in the restricted DSL; it
lints clean, verifies with a 12-byte state footprint, and reproduces the
native step function exactly. Programs that index arrays without a bounds
check or unroll past the instruction budget are refused before they ever
touch the datapath.
"""
from __future__ import annotations

import random

from ratelab.controllers import Iterate3Controller, ProgramController
from ratelab.policyscript import ITERATE3_SOURCE, lint, parse, verify
from ratelab.records import TxStatusContext

UNCHECKED = """\
state s[8];
var idx = ctx.mcs_used;
s[idx] = 1;
write_rate(3);
"""

UNROLLED = """\
state s[4];
unroll loop i in 0..2000 {
    unroll loop j in 0..4 {
        s[0] = s[0] + 1;
    }
}
write_rate(3);
"""


def the_shipped_program() -> None:
    print("1. The shipped controller as a DSL program:")
    head = "\n".join(ITERATE3_SOURCE.splitlines()[:6])
    print("   " + head.replace("\n", "\n   ") + "\n   ...")
    ast = parse(ITERATE3_SOURCE)
    print(f"   lint: {len(lint(ast))} diagnostics")
    report = verify(ast)
    print(f"   verify: ok={report.ok} state_bytes={report.state_bytes} "
          f"instruction_estimate={report.instruction_estimate}")


def equivalence_check() -> None:
    print("\n2. 1000 closed-loop steps, program vs native, must agree exactly:")
    native = Iterate3Controller()
    program = ProgramController("it3", parse(ITERATE3_SOURCE))
    rng = random.Random(4)
    mcs = 4
    for i in range(1000):
        c = TxStatusContext(wcid=1, success=1 if rng.random() < 0.9 else 0,
                            mcs_used=mcs, retry_count=rng.choice((0, 0, 0, 1, 2)))
        a, b = native.on_tx_status(c), program.on_tx_status(c)
        assert a == b, f"diverged at step {i}: {a} != {b}"
        mcs = a
    print("   all 1000 choices identical")


def what_gets_refused() -> None:
    print("\n3. An unchecked array index fails lint (rule 1) and verification:")
    diags = lint(parse(UNCHECKED))
    for d in diags:
        print(f"   lint line {d.line} rule {d.rule}: {d.message}")
    report = verify(parse(UNCHECKED))
    print(f"   verifier: ok={report.ok}")
    print("   " + report.log.splitlines()[-1])

    print("\n4. A fully unrolled 8000-step loop blows the instruction budget:")
    report = verify(parse(UNROLLED))
    print(f"   verifier: ok={report.ok} estimate={report.instruction_estimate}")
    print("   " + report.log.splitlines()[-1])


if __name__ == "__main__":
    the_shipped_program()
    equivalence_check()
    what_gets_refused()
