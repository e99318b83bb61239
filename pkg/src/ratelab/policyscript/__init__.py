"""Restricted rate-policy DSL: parse, lint, verify, execute.

Programs are straight-line integer code over a small per-station byte array,
the per-completion TX status context, and a single write_rate effect. The
toolchain mirrors a kernel-offload pipeline: a fast syntactic linter (five
rules), a conservative verifier (instruction budget, range analysis on every
array access), and a deterministic interpreter with a hard step budget.
"""
from .nodes import PolicyAst, PolicyParseError
from .parser import parse
from .lint import LintDiagnostic, lint
from .verify import VerifierReport, verify
from .interp import ProgramRuntimeError, StepBudgetExceeded, execute
from .builtin import ITERATE3_SOURCE, builtin_program

__all__ = [
    "PolicyAst",
    "PolicyParseError",
    "parse",
    "LintDiagnostic",
    "lint",
    "VerifierReport",
    "verify",
    "ProgramRuntimeError",
    "StepBudgetExceeded",
    "execute",
    "ITERATE3_SOURCE",
    "builtin_program",
]
