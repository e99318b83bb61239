"""Five-rule syntactic linter for policy programs.

The linter is a fast pre-verification pass: it tracks, per local variable,
whether its value derives from a state/scratch load or a ctx read ("derived"),
and whether a bounds check of the form `x < CONST` has already been seen for
it. It is deliberately heuristic; the verifier's range analysis is the sound
check.

Rules:
  1  array access indexed by a derived value with no preceding bounds check
  2  loop without an unroll annotation
  3  block not marked inline
  4  conditional nesting on state fields deeper than 8
  5  total declared state + scratch bytes exceed 512
"""
from __future__ import annotations

from dataclasses import dataclass

from .nodes import (
    Assign,
    Binary,
    BlockDef,
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

STACK_LIMIT_BYTES = 512
NESTING_LIMIT = 8


@dataclass(frozen=True)
class LintDiagnostic:
    rule: int
    line: int
    message: str


class _Taint:
    """Per-variable flags: derived-from-map/ctx, and checked-by-bounds-test."""

    def __init__(self):
        self.derived: set[str] = set()
        self.state_derived: set[str] = set()
        self.checked: set[str] = set()


def _expr_flags(expr, taint: _Taint) -> tuple[bool, bool]:
    """(derived, state_derived) for an expression."""
    if isinstance(expr, Int):
        return False, False
    if isinstance(expr, Var):
        name = expr.name
        derived = name in taint.derived and name not in taint.checked
        return derived, name in taint.state_derived and name not in taint.checked
    if isinstance(expr, CtxField):
        return True, False
    if isinstance(expr, Load):
        return True, True
    if isinstance(expr, Unary):
        return _expr_flags(expr.operand, taint)
    if isinstance(expr, Binary):
        dl, sl = _expr_flags(expr.left, taint)
        dr, sr = _expr_flags(expr.right, taint)
        return dl or dr, sl or sr
    if isinstance(expr, Call):
        d = s = False
        for a in expr.args:
            da, sa = _expr_flags(a, taint)
            d, s = d or da, s or sa
        return d, s
    return False, False


def _bounds_checked_vars(cond) -> set[str]:
    """Variables proven by this condition in the form `x < CONST`, including
    conjuncts of a top-level && chain."""
    out: set[str] = set()
    if isinstance(cond, Binary):
        if cond.op == "&&":
            out |= _bounds_checked_vars(cond.left)
            out |= _bounds_checked_vars(cond.right)
        elif cond.op == "<" and isinstance(cond.left, Var) and isinstance(cond.right, Int):
            out.add(cond.left.name)
    return out


class _Linter:
    def __init__(self, ast: PolicyAst):
        self.ast = ast
        self.diags: list[LintDiagnostic] = []

    def run(self) -> list[LintDiagnostic]:
        total = 0
        fired5 = False
        for d in self.ast.decl_order:
            total += d.length
            if total > STACK_LIMIT_BYTES and not fired5:
                self.diags.append(LintDiagnostic(
                    5, d.line,
                    f"declared state + scratch reaches {total} bytes, over the "
                    f"{STACK_LIMIT_BYTES}-byte stack limit"))
                fired5 = True

        for b in self.ast.blocks.values():
            if not b.inline:
                self.diags.append(LintDiagnostic(
                    3, b.line, f"block '{b.name}' is not marked inline"))

        taint = _Taint()
        self._walk(self.ast.body, taint, depth=0)
        for b in self.ast.blocks.values():
            self._walk(b.body, _Taint(), depth=0)

        self.diags.sort(key=lambda d: (d.line, d.rule))
        return self.diags

    def _check_index(self, array: str, index, taint: _Taint, line: int) -> None:
        derived, _ = _expr_flags(index, taint)
        if derived:
            self.diags.append(LintDiagnostic(
                1, line,
                f"'{array}[...]' indexed by a state/ctx-derived value with no "
                f"preceding bounds check"))

    def _scan_expr(self, expr, taint: _Taint) -> None:
        """Flag unchecked derived indices inside loads anywhere in an expression."""
        if isinstance(expr, Load):
            self._check_index(expr.array, expr.index, taint, expr.line)
            self._scan_expr(expr.index, taint)
        elif isinstance(expr, Unary):
            self._scan_expr(expr.operand, taint)
        elif isinstance(expr, Binary):
            self._scan_expr(expr.left, taint)
            self._scan_expr(expr.right, taint)
        elif isinstance(expr, Call):
            for a in expr.args:
                self._scan_expr(a, taint)

    def _walk(self, stmts: list, taint: _Taint, depth: int) -> None:
        for st in stmts:
            if isinstance(st, (VarDecl, Assign)):
                self._scan_expr(st.expr, taint)
                derived, state_derived = _expr_flags(st.expr, taint)
                taint.derived.discard(st.name)
                taint.state_derived.discard(st.name)
                taint.checked.discard(st.name)
                if derived:
                    taint.derived.add(st.name)
                if state_derived:
                    taint.state_derived.add(st.name)
            elif isinstance(st, Store):
                self._scan_expr(st.index, taint)
                self._scan_expr(st.expr, taint)
                self._check_index(st.array, st.index, taint, st.line)
            elif isinstance(st, If):
                self._scan_expr(st.cond, taint)
                _, on_state = _expr_flags(st.cond, taint)
                new_depth = depth + (1 if on_state else 0)
                if on_state and new_depth > NESTING_LIMIT:
                    self.diags.append(LintDiagnostic(
                        4, st.line,
                        f"conditional nesting on state fields is {new_depth} deep "
                        f"(limit {NESTING_LIMIT})"))
                # a check in this block counts as "preceding" for what follows
                taint.checked |= _bounds_checked_vars(st.cond)
                self._walk(st.then, taint, new_depth)
                self._walk(st.orelse, taint, new_depth)
            elif isinstance(st, Loop):
                if not st.unroll:
                    self.diags.append(LintDiagnostic(
                        2, st.line, "loop without an unroll annotation"))
                self._scan_expr(st.lo, taint)
                self._scan_expr(st.hi, taint)
                taint.derived.discard(st.var)
                taint.state_derived.discard(st.var)
                self._walk(st.body, taint, depth)
            elif isinstance(st, WriteRate):
                self._scan_expr(st.expr, taint)
            elif isinstance(st, (Do, Return)):
                # blocks are linted once in isolation; do-sites add nothing
                pass


def lint(ast: PolicyAst) -> list[LintDiagnostic]:
    """Run the five lint rules; returns diagnostics sorted by line."""
    return _Linter(ast).run()
