"""Conservative static verifier for policy programs.

Mirrors an in-kernel loader: (1) structural checks (blocks resolve, no
recursive expansion, loop bounds are constants, var declarations are
unconditional); (2) a fully-unrolled instruction estimate against a hard
budget of 4096; (3) interval range analysis over u64 scalars proving every
array access in bounds and every division nonzero. Values loaded from
state/scratch are (0, 255); ctx fields are unconstrained u64. The only
recognized narrowing form is `x < CONST` on a bare local (upper bound in the
then-branch, lower bound in the else-branch).

The verifier log is plain text, hard-truncated to 3072 bytes.
"""
from __future__ import annotations

from dataclasses import dataclass

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

INSTRUCTION_BUDGET = 4096
LOG_LIMIT_BYTES = 3072
U64_MAX = (1 << 64) - 1

FULL = (0, U64_MAX)
BYTE = (0, 255)
BOOL = (0, 1)


@dataclass
class VerifierReport:
    ok: bool
    log: str
    instruction_estimate: int
    state_bytes: int


class _Reject(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(message)
        self.line = line
        self.message = message


def _join(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    return min(a[0], b[0]), max(a[1], b[1])


def _clamp_u64(lo: int, hi: int) -> tuple[int, int]:
    if lo < 0 or hi > U64_MAX:
        return FULL
    return lo, hi


class _Analyzer:
    def __init__(self, ast: PolicyAst):
        self.ast = ast
        self.arrays = ast.array_lengths()
        self.log_lines: list[str] = []
        self.estimate = 0

    # -- structural pass ---------------------------------------------------

    def check_structure(self) -> None:
        for name, block in self.ast.blocks.items():
            self._check_no_recursion(name, [name])
        self._check_structure_stmts(self.ast.body, top_level=True)
        for block in self.ast.blocks.values():
            # block bodies execute where `do` appears, which may be nested
            self._check_structure_stmts(block.body, top_level=False)

    def _check_no_recursion(self, name: str, stack: list[str]) -> None:
        block = self.ast.blocks.get(name)
        if block is None:
            return
        for st in self._iter_stmts(block.body):
            if isinstance(st, Do):
                if st.name in stack:
                    raise _Reject(st.line, f"recursive block expansion through '{st.name}'")
                self._check_no_recursion(st.name, stack + [st.name])

    def _iter_stmts(self, stmts):
        for st in stmts:
            yield st
            if isinstance(st, If):
                yield from self._iter_stmts(st.then)
                yield from self._iter_stmts(st.orelse)
            elif isinstance(st, Loop):
                yield from self._iter_stmts(st.body)

    def _check_structure_stmts(self, stmts, top_level: bool) -> None:
        for st in stmts:
            if isinstance(st, VarDecl):
                if not top_level:
                    raise _Reject(st.line, "var declarations must be unconditional (top level only)")
            elif isinstance(st, Do):
                if st.name not in self.ast.blocks:
                    raise _Reject(st.line, f"unknown block '{st.name}'")
            elif isinstance(st, If):
                self._check_structure_stmts(st.then, False)
                self._check_structure_stmts(st.orelse, False)
            elif isinstance(st, Loop):
                if not isinstance(st.lo, Int) or not isinstance(st.hi, Int):
                    raise _Reject(st.line, "loop bounds must be integer constants")
                self._check_structure_stmts(st.body, False)

    # -- instruction estimate (fully unrolled) -------------------------------

    def estimate_cost(self) -> int:
        cost = sum(self._stmt_cost(st, ()) for st in self.ast.body)
        self.estimate = cost
        return cost

    def _expr_cost(self, e) -> int:
        if isinstance(e, (Int, Var, CtxField)):
            return 1
        if isinstance(e, Load):
            return 1 + self._expr_cost(e.index)
        if isinstance(e, Unary):
            return 1 + self._expr_cost(e.operand)
        if isinstance(e, Binary):
            return 1 + self._expr_cost(e.left) + self._expr_cost(e.right)
        if isinstance(e, Call):
            return 1 + sum(self._expr_cost(a) for a in e.args)
        raise _Reject(getattr(e, "line", 0), f"unknown expression node {type(e).__name__}")

    def _stmt_cost(self, st, stack: tuple) -> int:
        if isinstance(st, (VarDecl, Assign)):
            return 1 + self._expr_cost(st.expr)
        if isinstance(st, Store):
            return 1 + self._expr_cost(st.index) + self._expr_cost(st.expr)
        if isinstance(st, If):
            return (1 + self._expr_cost(st.cond)
                    + sum(self._stmt_cost(s, stack) for s in st.then)
                    + sum(self._stmt_cost(s, stack) for s in st.orelse))
        if isinstance(st, Loop):
            trips = max(0, st.hi.value - st.lo.value)
            body = sum(self._stmt_cost(s, stack) for s in st.body)
            return 1 + trips * (body + 1)
        if isinstance(st, Do):
            block = self.ast.blocks[st.name]
            return 1 + sum(self._stmt_cost(s, stack + (st.name,)) for s in block.body)
        if isinstance(st, WriteRate):
            return 1 + self._expr_cost(st.expr)
        if isinstance(st, Return):
            return 1
        raise _Reject(getattr(st, "line", 0), f"unknown statement node {type(st).__name__}")

    # -- interval analysis ----------------------------------------------------

    def analyze(self) -> None:
        env: dict[str, tuple[int, int]] = {}
        self._exec_stmts(self.ast.body, env)

    def _exec_stmts(self, stmts, env) -> bool:
        """Analyze a statement list; returns True if execution always returns."""
        for st in stmts:
            if isinstance(st, (VarDecl, Assign)):
                if isinstance(st, Assign) and st.name not in env:
                    raise _Reject(st.line, f"assignment to undeclared variable '{st.name}'")
                if isinstance(st, VarDecl) and st.name in env:
                    raise _Reject(st.line, f"redeclaration of '{st.name}'")
                env[st.name] = self._eval(st.expr, env)
            elif isinstance(st, Store):
                self._check_access(st.array, st.index, env, st.line)
                self._eval(st.expr, env)
            elif isinstance(st, If):
                if self._exec_if(st, env):
                    return True
            elif isinstance(st, Loop):
                lo, hi = st.lo.value, st.hi.value
                for i in range(lo, hi):
                    env[st.var] = (i, i)
                    if self._exec_stmts(st.body, env):
                        # a return inside a loop ends the program
                        return True
                env.pop(st.var, None)
            elif isinstance(st, Do):
                if self._exec_stmts(self.ast.blocks[st.name].body, env):
                    return True
            elif isinstance(st, WriteRate):
                self._eval(st.expr, env)
            elif isinstance(st, Return):
                return True
        return False

    def _exec_if(self, st: If, env) -> bool:
        """Analyze an if with optional narrowing; returns True if both paths return."""
        self._eval(st.cond, env)
        narrowed = None
        if (isinstance(st.cond, Binary) and st.cond.op == "<"
                and isinstance(st.cond.left, Var) and isinstance(st.cond.right, Int)
                and st.cond.left.name in env):
            narrowed = (st.cond.left.name, st.cond.right.value)

        then_env = dict(env)
        else_env = dict(env)
        then_dead = else_dead = False
        if narrowed:
            name, k = narrowed
            lo, hi = env[name]
            if lo <= k - 1:
                then_env[name] = (lo, min(hi, k - 1))
            else:
                then_dead = True
            if hi >= k:
                else_env[name] = (max(lo, k), hi)
            else:
                else_dead = True

        then_returns = then_dead or self._exec_stmts(st.then, then_env)
        else_returns = else_dead or self._exec_stmts(st.orelse, else_env)

        if then_returns and else_returns:
            return True
        if then_returns:
            env.clear()
            env.update(else_env)
        elif else_returns:
            env.clear()
            env.update(then_env)
        else:
            keys = set(then_env) & set(else_env)
            env.clear()
            for k2 in keys:
                env[k2] = _join(then_env[k2], else_env[k2])
        return False

    def _check_access(self, array: str, index, env, line: int) -> None:
        if array not in self.arrays:
            raise _Reject(line, f"unknown array '{array}'")
        length = self.arrays[array]
        lo, hi = self._eval(index, env)
        if lo < 0 or hi > length - 1:
            raise _Reject(
                line,
                f"index into '{array}' has range ({lo}, {hi}), outside [0, {length - 1}]")
        self.log_lines.append(f"line {line}: {array}[{lo}..{hi}] within len {length}: ok")

    def _eval(self, e, env) -> tuple[int, int]:
        if isinstance(e, Int):
            if not 0 <= e.value <= U64_MAX:
                raise _Reject(e.line, f"literal {e.value} outside u64")
            return (e.value, e.value)
        if isinstance(e, Var):
            if e.name not in env:
                raise _Reject(e.line, f"use of undeclared variable '{e.name}'")
            return env[e.name]
        if isinstance(e, CtxField):
            return FULL
        if isinstance(e, Load):
            self._check_access(e.array, e.index, env, e.line)
            return BYTE
        if isinstance(e, Unary):
            v = self._eval(e.operand, env)
            if e.op == "!":
                return BOOL
            if e.op == "~":
                return (U64_MAX - v[1], U64_MAX - v[0])
            if v == (0, 0):
                return (0, 0)
            return FULL  # wrapping negate
        if isinstance(e, Call):
            a = self._eval(e.args[0], env)
            b = self._eval(e.args[1], env)
            if e.fn == "min":
                return (min(a[0], b[0]), min(a[1], b[1]))
            if e.fn == "max":
                return (max(a[0], b[0]), max(a[1], b[1]))
            # clamp(x, k): x if x < k else k-1
            if b[0] != b[1]:
                raise _Reject(e.line, "clamp bound must be a constant")
            k = b[0]
            if k < 1:
                raise _Reject(e.line, "clamp bound must be >= 1")
            return (min(a[0], k - 1), min(a[1], k - 1))
        if isinstance(e, Binary):
            return self._eval_binary(e, env)
        raise _Reject(getattr(e, "line", 0), f"unknown expression node {type(e).__name__}")

    def _eval_binary(self, e: Binary, env) -> tuple[int, int]:
        op = e.op
        a = self._eval(e.left, env)
        b = self._eval(e.right, env)
        if op in ("==", "!=", "<", "<=", ">", ">=", "&&", "||"):
            return BOOL
        if op == "+":
            return _clamp_u64(a[0] + b[0], a[1] + b[1])
        if op == "-":
            return _clamp_u64(a[0] - b[1], a[1] - b[0])
        if op == "*":
            return _clamp_u64(a[0] * b[0], a[1] * b[1])
        if op == "/":
            if b[0] == 0:
                raise _Reject(e.line, "divisor may be zero")
            return (a[0] // b[1], a[1] // b[0])
        if op == "%":
            if b[0] == 0:
                raise _Reject(e.line, "modulo by possibly-zero divisor")
            return (0, min(a[1], b[1] - 1))
        if op == "&":
            return (0, min(a[1], b[1]))
        if op in ("|", "^"):
            bits = max(a[1].bit_length(), b[1].bit_length())
            return (0, min(U64_MAX, (1 << bits) - 1)) if bits else (0, 0)
        if op == "<<":
            if b[1] > 63:
                return FULL
            return _clamp_u64(a[0] << b[0], a[1] << b[1])
        if op == ">>":
            if b[1] > 63:
                return (0, a[1])
            return (a[0] >> b[1], a[1] >> b[0])
        raise _Reject(e.line, f"unknown operator {op!r}")


def verify(ast: PolicyAst) -> VerifierReport:
    """Statically verify a parsed program. Never raises; the report carries
    the verdict and a log truncated to 3072 bytes."""
    an = _Analyzer(ast)
    ok = True
    try:
        an.check_structure()
        est = an.estimate_cost()
        an.log_lines.insert(0, f"instruction estimate (fully unrolled): {est}")
        if est > INSTRUCTION_BUDGET:
            raise _Reject(0, f"instruction estimate {est} exceeds budget {INSTRUCTION_BUDGET}")
        an.analyze()
        an.log_lines.append("verdict: ACCEPT")
    except _Reject as r:
        ok = False
        where = f"line {r.line}: " if r.line else ""
        an.log_lines.append(f"reject: {where}{r.message}")
        an.log_lines.append("verdict: REJECT")
    log = "\n".join(an.log_lines)
    if len(log.encode()) > LOG_LIMIT_BYTES:
        log = log.encode()[:LOG_LIMIT_BYTES].decode(errors="ignore")
    return VerifierReport(ok=ok, log=log, instruction_estimate=an.estimate,
                          state_bytes=ast.state_size)
