"""Abstract syntax of the CPM core language.

Every node carries a ``label`` (unique per node occurrence) and an optional
source ``span``.  Neither takes part in equality, so two trees compare equal
exactly when they agree as abstract syntax.

Identifiers are plain strings.  Reserved identifiers (the ``x_`` family used
by the call protocol and the program driver) start with an underscore, which
the lexer never produces.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

# Source labels are positive and handed out by the parser; anything built
# elsewhere (tests, the interpreters' synthesized closure bodies) draws from
# this negative counter so it can never collide with a parsed label.
_fresh = itertools.count(-1, -1)


def fresh_label() -> int:
    return next(_fresh)


Span = Optional[tuple]  # (line, col), 1-based


def _label_field():
    return field(default_factory=fresh_label, compare=False, repr=False, kw_only=True)


def _span_field():
    return field(default=None, compare=False, repr=False, kw_only=True)


# ---------------------------------------------------------------- identifiers

RESERVED_PREFIX = "_x"


def reserved(i: int | None = None) -> str:
    """The reserved identifier x_ (``i is None``) or x_i."""
    return RESERVED_PREFIX if i is None else f"{RESERVED_PREFIX}{i}"


def is_reserved(name: str) -> bool:
    return name.startswith("_")


class SType(str, enum.Enum):
    INTEGER = "integer"
    BOOLEAN = "boolean"

    def __str__(self) -> str:
        return self.value


RTS_EXCEPTION = "rts_exception"
CATCHABLE_TYPES = (RTS_EXCEPTION, SType.INTEGER.value, SType.BOOLEAN.value)

RTS_NAMES = frozenset({"divbyzero", "stkovflw", "memerror", "datovflw"})
EXTERN_EXCEPTION = "externcall"
DEFAULT_RTS_NAMES = RTS_NAMES | {EXTERN_EXCEPTION}


def type_of(value) -> SType:
    """The storable type of an ``int`` or ``bool`` value."""
    return SType.BOOLEAN if isinstance(value, bool) else SType.INTEGER


# ---------------------------------------------------------------- expressions

ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("=", "<>", "<", "<=", ">=", ">")


@dataclass(frozen=True)
class IntConst:
    value: int
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class BoolConst:
    value: bool
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Var:
    name: str
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Expr"
    right: "Expr"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Cmp:
    op: str
    left: "Expr"
    right: "Expr"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Not:
    operand: "Expr"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"
    label: int = _label_field()
    span: Span = _span_field()


Expr = Union[IntConst, BoolConst, Var, Neg, Arith, Cmp, Not, And, Or]


# ---------------------------------------------------------------- environments
# Environment values live here because closures are syntax: EnvLit nodes
# embed environments, and FI/DI must see through them.


@dataclass(frozen=True)
class Loc:
    """An absolute location.  ``segment`` is ``"data"`` or ``"stack"``."""

    index: int
    segment: str = "data"

    def __str__(self) -> str:
        return f"{self.segment[0]}{self.index}"


Addr = Union[Loc, int]  # int is an indirect locator into the top-most frame


@dataclass(frozen=True)
class Cell:
    addr: Addr
    stype: SType


@dataclass(frozen=True)
class Closure:
    params: tuple  # of (name, SType)
    body: "Body"


EnvVal = Union[Cell, Closure]
Env = Mapping[str, EnvVal]


# ---------------------------------------------------------------- declarations


@dataclass(frozen=True)
class Nil:
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class LVar:
    name: str
    stype: SType
    init: Expr
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class DeclSeq:
    first: "Decl"
    second: "Decl"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class EnvLit:
    """Runtime-only: an environment used as a declaration."""

    env: Env
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class RecEnvLit:
    """Runtime-only: ``rec rho``."""

    env: Env
    label: int = _label_field()
    span: Span = _span_field()


Decl = Union[Nil, LVar, DeclSeq, EnvLit, RecEnvLit]


@dataclass(frozen=True)
class GVar:
    name: str
    stype: SType
    init: Expr
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple  # of (name, SType)
    body: "Body"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Rec:
    glob: "Glob"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class GlobSeq:
    first: "Glob"
    second: "Glob"
    label: int = _label_field()
    span: Span = _span_field()


Glob = Union[GVar, Function, Rec, GlobSeq, EnvLit, RecEnvLit]


# ---------------------------------------------------------------- bodies


@dataclass(frozen=True)
class Let:
    decl: Decl
    stmt: "Stmt"
    result: Expr
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Extern:
    stype: SType
    label: int = _label_field()
    span: Span = _span_field()


Body = Union[Let, Extern]


# ---------------------------------------------------------------- statements


@dataclass(frozen=True)
class Nop:
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Call:
    target: str
    func: str
    args: tuple  # of Expr
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class StmtSeq:
    first: "Stmt"
    second: "Stmt"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class Block:
    decl: Decl
    stmt: "Stmt"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    orelse: "Stmt"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Stmt"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class ThrowRts:
    name: str
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class ThrowExpr:
    expr: Expr
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class TryCatch:
    body: "Stmt"
    handlers: "Catch"
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class TryFinally:
    body: "Stmt"
    finalizer: "Stmt"
    label: int = _label_field()
    span: Span = _span_field()


Stmt = Union[Nop, Assign, Call, StmtSeq, Block, If, While, ThrowRts, ThrowExpr, TryCatch, TryFinally]


# ---------------------------------------------------------------- catch clauses


@dataclass(frozen=True)
class RtsPattern:
    name: str


@dataclass(frozen=True)
class TypePattern:
    ctype: str  # one of CATCHABLE_TYPES


@dataclass(frozen=True)
class Binder:
    name: str
    stype: SType


@dataclass(frozen=True)
class AnyPattern:
    pass


ExceptDecl = Union[RtsPattern, TypePattern, Binder, AnyPattern]


@dataclass(frozen=True)
class Clause:
    pattern: ExceptDecl
    stmt: Stmt
    label: int = _label_field()
    span: Span = _span_field()


@dataclass(frozen=True)
class CatchSeq:
    first: "Catch"
    second: "Catch"
    label: int = _label_field()
    span: Span = _span_field()


Catch = Union[Clause, CatchSeq]


@dataclass(frozen=True)
class Program:
    """A parsed program: the global declaration plus its source text."""

    glob: Glob
    source: str = field(default="", compare=False, repr=False)


def label_of(node) -> int:
    return node.label


# ---------------------------------------------------------------- traversal


def children(node) -> tuple:
    """Direct AST children (environments inside EnvLit are not traversed)."""
    if isinstance(node, (IntConst, BoolConst, Var, Nil, Nop, ThrowRts, Extern, EnvLit, RecEnvLit)):
        return ()
    if isinstance(node, (Neg, Not)):
        return (node.operand,)
    if isinstance(node, (Arith, Cmp, And, Or)):
        return (node.left, node.right)
    if isinstance(node, (LVar, GVar)):
        return (node.init,)
    if isinstance(node, (DeclSeq, GlobSeq, StmtSeq, CatchSeq)):
        return (node.first, node.second)
    if isinstance(node, Function):
        return (node.body,)
    if isinstance(node, Rec):
        return (node.glob,)
    if isinstance(node, Let):
        return (node.decl, node.stmt, node.result)
    if isinstance(node, Assign):
        return (node.expr,)
    if isinstance(node, Call):
        return tuple(node.args)
    if isinstance(node, Block):
        return (node.decl, node.stmt)
    if isinstance(node, If):
        return (node.cond, node.then, node.orelse)
    if isinstance(node, While):
        return (node.cond, node.body)
    if isinstance(node, ThrowExpr):
        return (node.expr,)
    if isinstance(node, TryCatch):
        return (node.body, node.handlers)
    if isinstance(node, TryFinally):
        return (node.body, node.finalizer)
    if isinstance(node, Clause):
        return (node.stmt,)
    raise TypeError(f"not an AST node: {node!r}")


def walk(node):
    """Pre-order iteration over ``node`` and its descendants."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


STMT_TYPES = (Nop, Assign, Call, StmtSeq, Block, If, While, ThrowRts, ThrowExpr, TryCatch, TryFinally)
EXPR_TYPES = (IntConst, BoolConst, Var, Neg, Arith, Cmp, Not, And, Or)


# ---------------------------------------------------------------- DI / FI


def _pattern_ids(p: ExceptDecl) -> frozenset:
    return frozenset({p.name}) if isinstance(p, Binder) else frozenset()


def defined_identifiers(node) -> frozenset:
    """DI: the identifiers a declaration (or formal list, or pattern) defines."""
    if isinstance(node, tuple):  # formal parameters
        return frozenset(name for name, _ in node)
    if isinstance(node, (LVar, GVar, Function, Binder)):
        return frozenset({node.name})
    if isinstance(node, (DeclSeq, GlobSeq)):
        return defined_identifiers(node.first) | defined_identifiers(node.second)
    if isinstance(node, Rec):
        return defined_identifiers(node.glob)
    if isinstance(node, (EnvLit, RecEnvLit)):
        return frozenset(node.env)
    if isinstance(node, (Nil, Let, Extern, RtsPattern, TypePattern, AnyPattern)):
        return frozenset()
    raise TypeError(f"DI undefined for {type(node).__name__}")


def env_free_identifiers(env: Env) -> frozenset:
    out: frozenset = frozenset()
    for v in env.values():
        if isinstance(v, Closure):
            out |= free_identifiers(v.body) - defined_identifiers(v.params)
    return out


def free_identifiers(node) -> frozenset:
    """FI: identifiers occurring free in ``node``."""
    fi = free_identifiers
    di = defined_identifiers
    if isinstance(node, (IntConst, BoolConst, Nil, Nop, ThrowRts, Extern)):
        return frozenset()
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, (Neg, Not)):
        return fi(node.operand)
    if isinstance(node, (Arith, Cmp, And, Or)):
        return fi(node.left) | fi(node.right)
    if isinstance(node, (LVar, GVar)):
        return fi(node.init)
    if isinstance(node, (DeclSeq, GlobSeq)):
        return fi(node.first) | (fi(node.second) - di(node.first))
    if isinstance(node, EnvLit):
        return env_free_identifiers(node.env)
    if isinstance(node, RecEnvLit):
        return env_free_identifiers(node.env) - frozenset(node.env)
    if isinstance(node, Function):
        return fi(node.body) - di(node.params)
    if isinstance(node, Rec):
        return fi(node.glob) - di(node.glob)
    if isinstance(node, Let):
        d = di(node.decl)
        return fi(node.decl) | (fi(node.stmt) - d) | (fi(node.result) - d)
    if isinstance(node, Assign):
        return frozenset({node.target}) | fi(node.expr)
    if isinstance(node, Call):
        out = frozenset({node.target, node.func})
        for a in node.args:
            out |= fi(a)
        return out
    if isinstance(node, (StmtSeq, CatchSeq)):
        return fi(node.first) | fi(node.second)
    if isinstance(node, Block):
        return fi(node.decl) | (fi(node.stmt) - di(node.decl))
    if isinstance(node, If):
        return fi(node.cond) | fi(node.then) | fi(node.orelse)
    if isinstance(node, While):
        return fi(node.cond) | fi(node.body)
    if isinstance(node, ThrowExpr):
        return fi(node.expr)
    if isinstance(node, TryCatch):
        return fi(node.body) | fi(node.handlers)
    if isinstance(node, TryFinally):
        return fi(node.body) | fi(node.finalizer)
    if isinstance(node, Clause):
        return fi(node.stmt) - _pattern_ids(node.pattern)
    if isinstance(node, Closure):
        return fi(node.body) - di(node.params)
    raise TypeError(f"FI undefined for {type(node).__name__}")


def restrict(env: Env, names) -> dict:
    """rho|I"""
    return {k: v for k, v in env.items() if k in names}


def remove(env: Env, names) -> dict:
    """rho \\ I"""
    return {k: v for k, v in env.items() if k not in names}


def extend(env: Env, other: Env) -> dict:
    """rho[rho0]: bindings of ``other`` win."""
    out = dict(env)
    out.update(other)
    return out
