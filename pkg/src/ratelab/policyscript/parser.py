"""Recursive-descent parser for the policy DSL.

Grammar (C-like expression precedence, // comments):

    program     := item*
    item        := state_decl | scratch_decl | block_def | stmt
    state_decl  := "state" IDENT "[" INT "]" ";"
    scratch_decl:= "scratch" IDENT "[" INT "]" ";"
    block_def   := ["inline"] "block" IDENT "{" stmt* "}"
    stmt        := "var" IDENT "=" expr ";"
                 | IDENT "=" expr ";"
                 | IDENT "[" expr "]" "=" expr ";"
                 | "if" "(" expr ")" braced ["else" (if_stmt | braced)]
                 | ["unroll"] "loop" IDENT "in" expr ".." expr braced
                 | "do" IDENT ";"
                 | "write_rate" "(" expr ")" ";"
                 | "return" ";"
    expr        := C-precedence over || && | ^ & ==,!= <,<=,>,>= <<,>> +,- *,/,%
                   with unary ! - ~, integer literals, locals, array loads,
                   ctx.<field>, and min/max/clamp calls

Declarations (state, scratch, block) are allowed at top level only; there is
at most one state declaration and its length is capped at 64 bytes.
"""
from __future__ import annotations

import re

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
    PolicyParseError,
    Return,
    ScratchDecl,
    StateDecl,
    Store,
    Unary,
    Var,
    VarDecl,
    WriteRate,
    BUILTIN_FNS,
    CTX_FIELD_SET,
    MAX_SOURCE_BYTES,
    MAX_STATE_BYTES,
)

KEYWORDS = {
    "state", "scratch", "var", "if", "else", "loop", "unroll", "in",
    "block", "inline", "do", "return", "write_rate", "ctx",
    "min", "max", "clamp",
}

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>[ \t\r]+)
    | (?P<comment>//[^\n]*)
    | (?P<nl>\n)
    | (?P<int>0x[0-9a-fA-F]+|\d+)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op>\|\||&&|==|!=|<=|>=|<<|>>|\.\.|[-+*/%&|^~!<>=(){}\[\];.,])
    """,
    re.VERBOSE,
)


class _Tok:
    __slots__ = ("kind", "text", "line")

    def __init__(self, kind, text, line):
        self.kind = kind
        self.text = text
        self.line = line

    def __repr__(self):
        return f"{self.kind}({self.text!r})@{self.line}"


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    line = 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise PolicyParseError(f"unexpected character {source[pos]!r}", line)
        pos = m.end()
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            continue
        if kind in ("ws", "comment"):
            continue
        toks.append(_Tok(kind, m.group(), line))
    toks.append(_Tok("eof", "", line))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise PolicyParseError(f"expected {text!r}, got {t.text!r}", t.line)
        return t

    def expect_ident(self) -> _Tok:
        t = self.next()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise PolicyParseError(f"expected identifier, got {t.text!r}", t.line)
        return t

    def expect_int(self) -> int:
        t = self.next()
        if t.kind != "int":
            raise PolicyParseError(f"expected integer literal, got {t.text!r}", t.line)
        return int(t.text, 0)

    # -- expressions (precedence climbing) --

    _LEVELS = [
        ("||",),
        ("&&",),
        ("|",),
        ("^",),
        ("&",),
        ("==", "!="),
        ("<", "<=", ">", ">="),
        ("<<", ">>"),
        ("+", "-"),
        ("*", "/", "%"),
    ]

    def parse_expr(self, level: int = 0):
        if level == len(self._LEVELS):
            return self.parse_unary()
        ops = self._LEVELS[level]
        node = self.parse_expr(level + 1)
        while self.peek().text in ops:
            t = self.next()
            rhs = self.parse_expr(level + 1)
            node = Binary(t.text, node, rhs, t.line)
        return node

    def parse_unary(self):
        t = self.peek()
        if t.text in ("!", "-", "~"):
            self.next()
            return Unary(t.text, self.parse_unary(), t.line)
        return self.parse_primary()

    def parse_primary(self):
        t = self.next()
        if t.kind == "int":
            return Int(int(t.text, 0), t.line)
        if t.text == "(":
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.text == "ctx":
            self.expect(".")
            f = self.next()
            if f.kind != "ident" or f.text not in CTX_FIELD_SET:
                raise PolicyParseError(f"unknown ctx field {f.text!r}", f.line)
            return CtxField(f.text, t.line)
        if t.text in BUILTIN_FNS:
            self.expect("(")
            args = [self.parse_expr()]
            while self.peek().text == ",":
                self.next()
                args.append(self.parse_expr())
            self.expect(")")
            if len(args) != 2:
                raise PolicyParseError(f"{t.text} takes exactly 2 arguments", t.line)
            return Call(t.text, args, t.line)
        if t.kind == "ident" and t.text not in KEYWORDS:
            if self.peek().text == "[":
                self.next()
                idx = self.parse_expr()
                self.expect("]")
                return Load(t.text, idx, t.line)
            return Var(t.text, t.line)
        raise PolicyParseError(f"unexpected token {t.text!r} in expression", t.line)

    # -- statements --

    def parse_braced(self) -> list:
        self.expect("{")
        body = []
        while self.peek().text != "}":
            if self.peek().kind == "eof":
                raise PolicyParseError("unexpected end of input: missing '}'", self.peek().line)
            body.append(self.parse_stmt())
        self.expect("}")
        return body

    def parse_stmt(self):
        t = self.peek()
        if t.text == "var":
            self.next()
            name = self.expect_ident()
            self.expect("=")
            e = self.parse_expr()
            self.expect(";")
            return VarDecl(name.text, e, t.line)
        if t.text == "if":
            return self.parse_if()
        if t.text in ("unroll", "loop"):
            unroll = t.text == "unroll"
            self.next()
            if unroll:
                self.expect("loop")
            line = t.line
            var = self.expect_ident()
            self.expect("in")
            lo = self.parse_expr()
            self.expect("..")
            hi = self.parse_expr()
            body = self.parse_braced()
            return Loop(var.text, lo, hi, body, unroll, line)
        if t.text == "do":
            self.next()
            name = self.expect_ident()
            self.expect(";")
            return Do(name.text, t.line)
        if t.text == "write_rate":
            self.next()
            self.expect("(")
            e = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return WriteRate(e, t.line)
        if t.text == "return":
            self.next()
            self.expect(";")
            return Return(t.line)
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.next()
            if self.peek().text == "[":
                self.next()
                idx = self.parse_expr()
                self.expect("]")
                self.expect("=")
                e = self.parse_expr()
                self.expect(";")
                return Store(t.text, idx, e, t.line)
            self.expect("=")
            e = self.parse_expr()
            self.expect(";")
            return Assign(t.text, e, t.line)
        raise PolicyParseError(f"unexpected token {t.text!r}", t.line)

    def parse_if(self) -> If:
        t = self.expect("if")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then = self.parse_braced()
        orelse: list = []
        if self.peek().text == "else":
            self.next()
            if self.peek().text == "if":
                orelse = [self.parse_if()]
            else:
                orelse = self.parse_braced()
        return If(cond, then, orelse, t.line)


def parse(source: str) -> PolicyAst:
    """Parse DSL source into a PolicyAst. Raises PolicyParseError."""
    if len(source.encode()) > MAX_SOURCE_BYTES:
        raise PolicyParseError(f"source exceeds {MAX_SOURCE_BYTES} bytes", 1)
    p = _Parser(_tokenize(source))
    state: StateDecl | None = None
    scratch: list[ScratchDecl] = []
    blocks: dict[str, BlockDef] = {}
    body: list = []
    decl_order: list = []

    while p.peek().kind != "eof":
        t = p.peek()
        if t.text in ("state", "scratch"):
            p.next()
            name = p.expect_ident()
            p.expect("[")
            length = p.expect_int()
            p.expect("]")
            p.expect(";")
            if length < 1:
                raise PolicyParseError("array length must be >= 1", t.line)
            if t.text == "state":
                if state is not None:
                    raise PolicyParseError("only one state array may be declared", t.line)
                if length > MAX_STATE_BYTES:
                    raise PolicyParseError(
                        f"state array length {length} exceeds {MAX_STATE_BYTES}", t.line)
                state = StateDecl(name.text, length, t.line)
                decl_order.append(state)
            else:
                d = ScratchDecl(name.text, length, t.line)
                scratch.append(d)
                decl_order.append(d)
            continue
        if t.text in ("inline", "block"):
            inline = t.text == "inline"
            p.next()
            if inline:
                p.expect("block")
            name = p.expect_ident()
            block_body = p.parse_braced()
            if name.text in blocks:
                raise PolicyParseError(f"duplicate block {name.text!r}", t.line)
            blocks[name.text] = BlockDef(name.text, block_body, inline, t.line)
            continue
        body.append(p.parse_stmt())

    return PolicyAst(source=source, state=state, scratch=scratch,
                     blocks=blocks, body=body, decl_order=decl_order)
