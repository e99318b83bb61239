"""Deterministic interpreter for verified policy programs.

Semantics: u64 wrapping arithmetic, unsigned comparisons, shift amounts
masked to 6 bits, byte-truncating array stores, last-write-wins write_rate.
Every node visit costs one step against a hard budget (default 4096);
exceeding it aborts the invocation, which callers treat as a controller no-op.
The interpreter re-checks array bounds defensively even though verified
programs cannot fail them.
"""
from __future__ import annotations

from ..records import TxStatusContext, CTX_FIELDS, MASK64
from .nodes import (
    Assign,
    Binary,
    Call,
    CtxField,
    Do,
    If,
    Int,
    Load,
    Loop,
    PolicyAst,
    Return,
    Store,
    Unary,
    Var,
    VarDecl,
    WriteRate,
)

STEP_BUDGET = 4096
MCS_MAX = 7


class ProgramRuntimeError(Exception):
    pass


class StepBudgetExceeded(ProgramRuntimeError):
    pass


class _ReturnSignal(Exception):
    pass


class _Machine:
    def __init__(self, ast: PolicyAst, state: bytearray, ctx_values: dict[str, int], budget: int):
        self.ast = ast
        self.state = state
        self.ctx = ctx_values
        self.budget = budget
        self.steps = 0
        self.env: dict[str, int] = {}
        self.arrays: dict[str, bytearray] = {}
        if ast.state:
            self.arrays[ast.state.name] = state
        for d in ast.scratch:
            self.arrays[d.name] = bytearray(d.length)
        self.rate_written: int | None = None

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.budget:
            raise StepBudgetExceeded(f"step budget {self.budget} exceeded")

    def run(self) -> None:
        try:
            self.exec_stmts(self.ast.body)
        except _ReturnSignal:
            pass

    def exec_stmts(self, stmts) -> None:
        for st in stmts:
            self.tick()
            cls = type(st)
            if cls is Assign or cls is VarDecl:
                self.env[st.name] = self.eval(st.expr)
            elif cls is Store:
                arr = self.arrays.get(st.array)
                if arr is None:
                    raise ProgramRuntimeError(f"line {st.line}: unknown array '{st.array}'")
                idx = self.eval(st.index)
                if idx >= len(arr):
                    raise ProgramRuntimeError(
                        f"line {st.line}: index {idx} out of bounds for '{st.array}'")
                arr[idx] = self.eval(st.expr) & 0xFF
            elif cls is If:
                if self.eval(st.cond):
                    self.exec_stmts(st.then)
                else:
                    self.exec_stmts(st.orelse)
            elif cls is Loop:
                lo = self.eval(st.lo)
                hi = self.eval(st.hi)
                for i in range(lo, hi):
                    self.env[st.var] = i
                    self.exec_stmts(st.body)
                self.env.pop(st.var, None)
            elif cls is Do:
                block = self.ast.blocks.get(st.name)
                if block is None:
                    raise ProgramRuntimeError(f"line {st.line}: unknown block '{st.name}'")
                self.exec_stmts(block.body)
            elif cls is WriteRate:
                self.rate_written = self.eval(st.expr)
            elif cls is Return:
                raise _ReturnSignal()
            else:
                raise ProgramRuntimeError(f"unknown statement {cls.__name__}")

    def eval(self, e) -> int:
        self.tick()
        cls = type(e)
        if cls is Int:
            return e.value & MASK64
        if cls is Var:
            try:
                return self.env[e.name]
            except KeyError:
                raise ProgramRuntimeError(
                    f"line {e.line}: use of undeclared variable '{e.name}'") from None
        if cls is CtxField:
            return self.ctx[e.name]
        if cls is Load:
            arr = self.arrays.get(e.array)
            if arr is None:
                raise ProgramRuntimeError(f"line {e.line}: unknown array '{e.array}'")
            idx = self.eval(e.index)
            if idx >= len(arr):
                raise ProgramRuntimeError(
                    f"line {e.line}: index {idx} out of bounds for '{e.array}'")
            return arr[idx]
        if cls is Binary:
            op = e.op
            if op == "&&":
                return 1 if self.eval(e.left) and self.eval(e.right) else 0
            if op == "||":
                return 1 if self.eval(e.left) or self.eval(e.right) else 0
            a = self.eval(e.left)
            b = self.eval(e.right)
            if op == "+":
                return (a + b) & MASK64
            if op == "-":
                return (a - b) & MASK64
            if op == "*":
                return (a * b) & MASK64
            if op == "/":
                if b == 0:
                    raise ProgramRuntimeError(f"line {e.line}: division by zero")
                return a // b
            if op == "%":
                if b == 0:
                    raise ProgramRuntimeError(f"line {e.line}: modulo by zero")
                return a % b
            if op == "&":
                return a & b
            if op == "|":
                return a | b
            if op == "^":
                return a ^ b
            if op == "<<":
                return (a << (b & 63)) & MASK64
            if op == ">>":
                return a >> (b & 63)
            if op == "==":
                return 1 if a == b else 0
            if op == "!=":
                return 1 if a != b else 0
            if op == "<":
                return 1 if a < b else 0
            if op == "<=":
                return 1 if a <= b else 0
            if op == ">":
                return 1 if a > b else 0
            if op == ">=":
                return 1 if a >= b else 0
            raise ProgramRuntimeError(f"unknown operator {op!r}")
        if cls is Unary:
            v = self.eval(e.operand)
            if e.op == "!":
                return 0 if v else 1
            if e.op == "~":
                return v ^ MASK64
            return (-v) & MASK64
        if cls is Call:
            a = self.eval(e.args[0])
            b = self.eval(e.args[1])
            if e.fn == "min":
                return a if a < b else b
            if e.fn == "max":
                return a if a > b else b
            return a if a < b else (b - 1) & MASK64
        raise ProgramRuntimeError(f"unknown expression {cls.__name__}")


def execute(
    ast: PolicyAst,
    state: bytes,
    ctx: TxStatusContext,
    step_budget: int = STEP_BUDGET,
) -> tuple[bytes, int | None]:
    """Run one controller invocation.

    Returns (new state bytes, chosen MCS or None). The chosen rate is the last
    write_rate argument, truncated to a byte and capped at MCS 7. Raises
    StepBudgetExceeded when the budget runs out (state is discarded; callers
    treat the invocation as a no-op).
    """
    if len(state) != ast.state_size:
        raise ValueError(
            f"state blob is {len(state)} bytes; program declares {ast.state_size}")
    ctx_values = dict(zip(CTX_FIELDS, ctx.as_u64_slots()))
    m = _Machine(ast, bytearray(state), ctx_values, step_budget)
    m.run()
    chosen = None
    if m.rate_written is not None:
        chosen = min(m.rate_written & 0xFF, MCS_MAX)
    return bytes(m.state), chosen
