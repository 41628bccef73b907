"""Recursive-descent parser for the textual CPM grammar (see docs/grammar.md)."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    And, AnyPattern, Arith, Assign, Binder, Block, BoolConst, Call, CatchSeq, Clause, Cmp,
    DEFAULT_RTS_NAMES, DeclSeq, Extern, Function, GlobSeq, GVar, If, IntConst, Let, LVar, Neg,
    Nil, Nop, Not, Or, Program, Rec, RtsPattern, SType, StmtSeq, ThrowExpr, ThrowRts,
    TryCatch, TryFinally, TypePattern, Var, While,
)

KEYWORDS = frozenset(
    "gvar lvar function rec let in result extern nil nop if then else while do throw try "
    "catch finally any true false not and or integer boolean rts_exception".split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<name>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>:=|<>|<=|>=|[-+*/%=<>:;,(){}])
    """,
    re.VERBOSE,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # int | name | kw | rts | op | eof
    text: str
    line: int
    col: int


def tokenize(source: str, rts_names=DEFAULT_RTS_NAMES) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind, text = m.lastgroup, m.group()
        col = pos - line_start + 1
        if kind == "name":
            if text in KEYWORDS:
                kind = "kw"
            elif text in rts_names:
                kind = "rts"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_CMP = {"=": "=", "<>": "<>", "<": "<", "<=": "<=", ">=": ">=", ">": ">"}


class Parser:
    def __init__(self, source: str, rts_names=DEFAULT_RTS_NAMES):
        self.tokens = tokenize(source, rts_names)
        self.pos = 0
        self._next_label = 0

    # -- token helpers
    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("kw", "op") and t.text == text

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        where = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{message} (found {where})", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "name":
            self.error("expected identifier")
        return self.advance().text

    def node(self, cls, tok: Token, *args):
        self._next_label += 1
        return cls(*args, label=self._next_label, span=(tok.line, tok.col))

    def stype(self) -> SType:
        t = self.peek()
        if t.kind == "kw" and t.text in ("integer", "boolean"):
            self.advance()
            return SType(t.text)
        self.error("expected type 'integer' or 'boolean'")

    # -- globals
    def program(self) -> Program:
        g = self.glob_seq()
        if self.peek().kind != "eof":
            self.error("expected ';' or end of input")
        return g

    def glob_seq(self):
        tok = self.peek()
        first = self.glob_item()
        if self.at(";"):
            self.advance()
            return self.node(GlobSeq, tok, first, self.glob_seq())
        return first

    def glob_item(self):
        tok = self.peek()
        if self.at("gvar"):
            self.advance()
            name = self.ident()
            self.expect(":")
            st = self.stype()
            self.expect("=")
            return self.node(GVar, tok, name, st, self.expr())
        if self.at("function"):
            self.advance()
            name = self.ident()
            params = self.params()
            self.expect("=")
            return self.node(Function, tok, name, params, self.body())
        if self.at("rec"):
            self.advance()
            return self.node(Rec, tok, self.glob_item())
        if self.at("("):
            self.advance()
            g = self.glob_seq()
            self.expect(")")
            return g
        self.error("expected 'gvar', 'function' or 'rec'")

    def params(self) -> tuple:
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                name = self.ident()
                self.expect(":")
                out.append((name, self.stype()))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        return tuple(out)

    def body(self):
        tok = self.peek()
        if self.at("extern"):
            self.advance()
            self.expect(":")
            return self.node(Extern, tok, self.stype())
        self.expect("let")
        d = self.decl_seq()
        self.expect("in")
        s = self.stmt_seq()
        self.expect("result")
        return self.node(Let, tok, d, s, self.expr())

    # -- local declarations
    def decl_seq(self):
        tok = self.peek()
        first = self.decl_item()
        if self.at(";") and (self.at("lvar", 1) or self.at("nil", 1)):
            self.advance()
            return self.node(DeclSeq, tok, first, self.decl_seq())
        return first

    def decl_item(self):
        tok = self.peek()
        if self.at("nil"):
            self.advance()
            return self.node(Nil, tok)
        if self.at("lvar"):
            self.advance()
            name = self.ident()
            self.expect(":")
            st = self.stype()
            self.expect("=")
            return self.node(LVar, tok, name, st, self.expr())
        self.error("expected 'lvar' or 'nil'")

    # -- statements
    def stmt_seq(self):
        tok = self.peek()
        first = self.stmt()
        if self.at(";"):
            self.advance()
            return self.node(StmtSeq, tok, first, self.stmt_seq())
        return first

    def stmt(self):
        tok = self.peek()
        if self.at("nop"):
            self.advance()
            return self.node(Nop, tok)
        if tok.kind == "name":
            target = self.advance().text
            self.expect(":=")
            if self.peek().kind == "name" and self.at("(", 1):
                func = self.advance().text
                self.advance()
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.expr())
                self.expect(")")
                return self.node(Call, tok, target, func, tuple(args))
            return self.node(Assign, tok, target, self.expr())
        if self.at("{"):
            self.advance()
            d = self.decl_seq()
            self.expect(";")
            s = self.stmt_seq()
            self.expect("}")
            return self.node(Block, tok, d, s)
        if self.at("if"):
            self.advance()
            c = self.expr()
            self.expect("then")
            s0 = self.stmt()
            self.expect("else")
            return self.node(If, tok, c, s0, self.stmt())
        if self.at("while"):
            self.advance()
            c = self.expr()
            self.expect("do")
            return self.node(While, tok, c, self.stmt())
        if self.at("throw"):
            self.advance()
            if self.peek().kind == "rts":
                return self.node(ThrowRts, tok, self.advance().text)
            return self.node(ThrowExpr, tok, self.expr())
        if self.at("try"):
            self.advance()
            s = self.stmt()
            if self.at("finally"):
                self.advance()
                return self.node(TryFinally, tok, s, self.stmt())
            if not self.at("catch"):
                self.error("expected 'catch' or 'finally'")
            return self.node(TryCatch, tok, s, self.catch_seq())
        if self.at("("):
            self.advance()
            s = self.stmt_seq()
            self.expect(")")
            return s
        self.error("expected statement")

    def catch_seq(self):
        tok = self.expect("catch")
        first = self.clause(tok)
        if self.at("catch"):
            return self.node(CatchSeq, tok, first, self.catch_seq())
        return first

    def clause(self, tok: Token):
        self.expect("(")
        t = self.peek()
        if self.at("any"):
            self.advance()
            p = AnyPattern()
        elif t.kind == "rts":
            p = RtsPattern(self.advance().text)
        elif t.kind == "kw" and t.text in ("rts_exception", "integer", "boolean"):
            p = TypePattern(self.advance().text)
        elif t.kind == "name":
            name = self.advance().text
            self.expect(":")
            p = Binder(name, self.stype())
        else:
            self.error("expected exception pattern")
        self.expect(")")
        return self.node(Clause, tok, p, self.stmt())

    # -- expressions
    def expr(self):
        tok = self.peek()
        e = self.and_expr()
        while self.at("or"):
            self.advance()
            e = self.node(Or, tok, e, self.and_expr())
        return e

    def and_expr(self):
        tok = self.peek()
        e = self.not_expr()
        while self.at("and"):
            self.advance()
            e = self.node(And, tok, e, self.not_expr())
        return e

    def not_expr(self):
        tok = self.peek()
        if self.at("not"):
            self.advance()
            return self.node(Not, tok, self.not_expr())
        return self.cmp_expr()

    def cmp_expr(self):
        tok = self.peek()
        e = self.add_expr()
        t = self.peek()
        if t.kind == "op" and t.text in _CMP:
            self.advance()
            e = self.node(Cmp, tok, _CMP[t.text], e, self.add_expr())
            t = self.peek()
            if t.kind == "op" and t.text in _CMP:
                self.error("comparison operators do not associate")
        return e

    def add_expr(self):
        tok = self.peek()
        e = self.mul_expr()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            e = self.node(Arith, tok, op, e, self.mul_expr())
        return e

    def mul_expr(self):
        tok = self.peek()
        e = self.unary()
        while self.at("*") or self.at("/") or self.at("%"):
            op = self.advance().text
            e = self.node(Arith, tok, op, e, self.unary())
        return e

    def unary(self):
        tok = self.peek()
        if self.at("-"):
            self.advance()
            nxt = self.peek()
            if nxt.kind == "int":  # a negative literal
                self.advance()
                return self.node(IntConst, tok, -int(nxt.text))
            return self.node(Neg, tok, self.unary())
        return self.atom()

    def atom(self):
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return self.node(IntConst, tok, int(tok.text))
        if self.at("true") or self.at("false"):
            self.advance()
            return self.node(BoolConst, tok, tok.text == "true")
        if tok.kind == "name":
            self.advance()
            return self.node(Var, tok, tok.text)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected expression")


def parse(source: str, rts_names=DEFAULT_RTS_NAMES) -> Program:
    """Parse a whole program (a global declaration)."""
    p = Parser(source, rts_names)
    return Program(p.program(), source)


def parse_fragment(source: str, category: str = "stmt", rts_names=DEFAULT_RTS_NAMES):
    """Parse a single expression, statement, declaration or body (for tests and tooling)."""
    p = Parser(source, rts_names)
    rule = {"expr": p.expr, "stmt": p.stmt_seq, "decl": p.decl_seq, "glob": p.glob_seq, "body": p.body}[category]
    node = rule()
    if p.peek().kind != "eof":
        p.error("unexpected trailing input")
    return node
