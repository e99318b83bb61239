"""AST node types for the policy DSL. Every node carries its source line."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..records import CTX_FIELDS

MAX_SOURCE_BYTES = 64 * 1024
MAX_STATE_BYTES = 64

BUILTIN_FNS = ("min", "max", "clamp")


class PolicyParseError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


# -- expressions -------------------------------------------------------------


@dataclass
class Int:
    value: int
    line: int


@dataclass
class Var:
    name: str
    line: int


@dataclass
class Load:
    array: str
    index: "Expr"
    line: int


@dataclass
class CtxField:
    name: str
    line: int


@dataclass
class Call:
    fn: str  # min | max | clamp
    args: list
    line: int


@dataclass
class Unary:
    op: str  # ! - ~
    operand: "Expr"
    line: int


@dataclass
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int


Expr = Int | Var | Load | CtxField | Call | Unary | Binary


# -- statements ----------------------------------------------------------------


@dataclass
class StateDecl:
    name: str
    length: int
    line: int


@dataclass
class ScratchDecl:
    name: str
    length: int
    line: int


@dataclass
class BlockDef:
    name: str
    body: list
    inline: bool
    line: int


@dataclass
class VarDecl:
    name: str
    expr: Expr
    line: int


@dataclass
class Assign:
    name: str
    expr: Expr
    line: int


@dataclass
class Store:
    array: str
    index: Expr
    expr: Expr
    line: int


@dataclass
class If:
    cond: Expr
    then: list
    orelse: list
    line: int


@dataclass
class Loop:
    var: str
    lo: Expr
    hi: Expr
    body: list
    unroll: bool
    line: int


@dataclass
class Do:
    name: str
    line: int


@dataclass
class WriteRate:
    expr: Expr
    line: int


@dataclass
class Return:
    line: int


Stmt = VarDecl | Assign | Store | If | Loop | Do | WriteRate | Return


@dataclass
class PolicyAst:
    """A parsed program: declarations, named blocks, and the main body."""

    source: str
    state: StateDecl | None
    scratch: list[ScratchDecl]
    blocks: dict[str, BlockDef]
    body: list  # main statement sequence
    decl_order: list = field(default_factory=list)  # StateDecl/ScratchDecl in source order

    @property
    def state_size(self) -> int:
        return self.state.length if self.state else 0

    def array_lengths(self) -> dict[str, int]:
        out = {}
        if self.state:
            out[self.state.name] = self.state.length
        for d in self.scratch:
            out[d.name] = d.length
        return out

    def is_state_array(self, name: str) -> bool:
        return self.state is not None and self.state.name == name


CTX_FIELD_SET = frozenset(CTX_FIELDS)
