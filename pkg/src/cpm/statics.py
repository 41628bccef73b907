"""Well-typedness of CPM phrases and program validity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .syntax import (
    And, AnyPattern, Arith, Assign, Binder, Block, BoolConst, Call, CatchSeq, Cell, Clause,
    Closure, Cmp, DeclSeq, EnvLit, Extern, Function, GlobSeq, GVar, If, IntConst, Let, LVar,
    Neg, Nil, Nop, Not, Or, Program, Rec, RecEnvLit, RtsPattern, SType, StmtSeq, ThrowExpr,
    ThrowRts, TryCatch, TryFinally, TypePattern, Var, While, defined_identifiers,
    free_identifiers, is_reserved, walk,
)


@dataclass(frozen=True)
class LocationOf:
    stype: SType

    def __str__(self) -> str:
        return f"location {self.stype}"


@dataclass(frozen=True)
class FnType:
    params: tuple  # of (name, SType)
    result: SType

    def __str__(self) -> str:
        ps = ", ".join(f"{n} : {t}" for n, t in self.params)
        return f"({ps}) -> {self.result}"


TypeEnv = Mapping[str, object]


class StaticError(Exception):
    pass


class CpmTypeError(StaticError):
    """A phrase is not well-typed.  ``rule`` names the typing rule that failed."""

    def __init__(self, rule: str, node, message: str, expected=None, actual=None):
        self.rule = rule
        self.node = node
        self.expected = expected
        self.actual = actual
        self.label = getattr(node, "label", None)
        self.span = getattr(node, "span", None)
        where = f"{self.span[0]}:{self.span[1]}: " if self.span else ""
        super().__init__(f"{where}[{rule}] {message}")


class RecVarError(CpmTypeError):
    pass


class ValidityError(StaticError):
    KINDS = ("reserved-identifier", "ill-typed", "missing-or-wrong-main")

    def __init__(self, kind: str, message: str, cause: Exception | None = None):
        assert kind in self.KINDS
        self.kind = kind
        self.cause = cause
        super().__init__(f"{kind}: {message}")


def _lookup(beta: TypeEnv, name: str, node, rule: str):
    if name not in beta:
        raise CpmTypeError(rule, node, f"identifier {name!r} is not bound")
    return beta[name]


def _expect(rule, node, expected, actual):
    if expected != actual:
        raise CpmTypeError(rule, node, f"expected {expected}, found {actual}", expected, actual)


# ---------------------------------------------------------------- expressions


def check_expr(beta: TypeEnv, e) -> SType:
    I, B = SType.INTEGER, SType.BOOLEAN
    if isinstance(e, IntConst):
        return I
    if isinstance(e, BoolConst):
        return B
    if isinstance(e, Var):
        t = _lookup(beta, e.name, e, "identifier")
        if not isinstance(t, LocationOf):
            raise CpmTypeError("identifier", e, f"{e.name!r} denotes a function, not a variable")
        return t.stype
    if isinstance(e, Neg):
        _expect("unary-minus", e.operand, I, check_expr(beta, e.operand))
        return I
    if isinstance(e, Arith):
        _expect("arithmetic", e.left, I, check_expr(beta, e.left))
        _expect("arithmetic", e.right, I, check_expr(beta, e.right))
        return I
    if isinstance(e, Cmp):
        _expect("comparison", e.left, I, check_expr(beta, e.left))
        _expect("comparison", e.right, I, check_expr(beta, e.right))
        return B
    if isinstance(e, Not):
        _expect("negation", e.operand, B, check_expr(beta, e.operand))
        return B
    if isinstance(e, (And, Or)):
        rule = "conjunction" if isinstance(e, And) else "disjunction"
        _expect(rule, e.left, B, check_expr(beta, e.left))
        _expect(rule, e.right, B, check_expr(beta, e.right))
        return B
    raise CpmTypeError("expression", e, f"not an expression: {type(e).__name__}")


# ---------------------------------------------------------------- declarations


def check_params(params: tuple, node=None) -> dict:
    delta: dict = {}
    for name, st in params:
        if name in delta:
            raise CpmTypeError("formal-parameters", node, f"duplicate formal parameter {name!r}")
        delta[name] = LocationOf(st)
    return delta


def env_type(env) -> dict:
    """The type environment generated by a runtime environment literal."""
    out = {}
    for name, v in env.items():
        if isinstance(v, Cell):
            out[name] = LocationOf(v.stype)
        else:
            out[name] = FnType(v.params, _closure_result(v))
    return out


def _closure_result(c: Closure) -> SType:
    b = c.body
    if isinstance(b, Extern):
        return b.stype
    beta = check_params(c.params)
    beta.update(_generated_shape(b.decl, beta))
    return check_expr(beta, b.result)


def _generated_shape(g, beta: TypeEnv) -> dict:
    """Pass 1 of rec typing: the environment ``g`` generates.

    Expressions only mention variables, so a function's result type follows
    from the ambient variables, its formals and its local declarations; no
    sibling function type is needed.
    """
    if isinstance(g, (GVar, LVar)):
        return {g.name: LocationOf(g.stype)}
    if isinstance(g, Function):
        if isinstance(g.body, Extern):
            return {g.name: FnType(g.params, g.body.stype)}
        inner = {**beta, **check_params(g.params, g)}
        inner.update(_generated_shape(g.body.decl, inner))
        return {g.name: FnType(g.params, check_expr(inner, g.body.result))}
    if isinstance(g, (GlobSeq, DeclSeq)):
        out = _generated_shape(g.first, beta)
        out.update(_generated_shape(g.second, {**beta, **out}))
        return out
    if isinstance(g, Rec):
        return _generated_shape(g.glob, beta)
    if isinstance(g, Nil):
        return {}
    if isinstance(g, (EnvLit, RecEnvLit)):
        return env_type(g.env)
    raise CpmTypeError("declaration", g, f"not a declaration: {type(g).__name__}")


def check_decl_glob(beta: TypeEnv, node) -> dict:
    """Return the type environment generated by a declaration."""
    if isinstance(node, Nil):
        return {}
    if isinstance(node, (GVar, LVar)):
        rule = "gvar" if isinstance(node, GVar) else "lvar"
        _expect(rule, node.init, node.stype, check_expr(beta, node.init))
        return {node.name: LocationOf(node.stype)}
    if isinstance(node, (GlobSeq, DeclSeq)):
        d0 = check_decl_glob(beta, node.first)
        d1 = check_decl_glob({**beta, **d0}, node.second)
        return {**d0, **d1}
    if isinstance(node, Function):
        delta = check_params(node.params, node)
        st = check_stmt_catch_body({**beta, **delta}, node.body)
        return {node.name: FnType(node.params, st)}
    if isinstance(node, Rec):
        g = node.glob
        delta = _generated_shape(g, beta)
        for name, t in delta.items():
            if isinstance(t, LocationOf):
                raise RecVarError("rec", node, f"recursive declaration of variable {name!r}")
        j = free_identifiers(g) & defined_identifiers(g)
        checked = check_decl_glob({**beta, **{k: v for k, v in delta.items() if k in j}}, g)
        if checked != delta:
            raise CpmTypeError("rec", node, "generated environment does not match its recursive assumption")
        return checked
    if isinstance(node, (EnvLit, RecEnvLit)):
        return env_type(node.env)
    raise CpmTypeError("declaration", node, f"not a declaration: {type(node).__name__}")


# ---------------------------------------------------------------- statements, catch, bodies


def _pattern_env(p, node) -> dict:
    if isinstance(p, Binder):
        return {p.name: LocationOf(p.stype)}
    if isinstance(p, (AnyPattern, RtsPattern, TypePattern)):
        return {}
    raise CpmTypeError("exception-declaration", node, f"bad pattern {p!r}")


def check_stmt_catch_body(beta: TypeEnv, node):
    """Statements and catch clauses yield ``None`` (ok); bodies yield their result type."""
    if isinstance(node, Nop):
        return None
    if isinstance(node, Assign):
        t = _lookup(beta, node.target, node, "assignment")
        if not isinstance(t, LocationOf):
            raise CpmTypeError("assignment", node, f"{node.target!r} is not a variable")
        _expect("assignment", node.expr, t.stype, check_expr(beta, node.expr))
        return None
    if isinstance(node, Call):
        t0 = _lookup(beta, node.target, node, "call")
        tf = _lookup(beta, node.func, node, "call")
        if not isinstance(t0, LocationOf):
            raise CpmTypeError("call", node, f"{node.target!r} is not a variable")
        if not isinstance(tf, FnType):
            raise CpmTypeError("call", node, f"{node.func!r} is not a function")
        if t0.stype != tf.result:
            raise CpmTypeError("call", node, "result type mismatch", tf.result, t0.stype)
        if len(node.args) != len(tf.params):
            raise CpmTypeError("call", node, f"expected {len(tf.params)} arguments, found {len(node.args)}")
        for arg, (_, st) in zip(node.args, tf.params):
            _expect("call", arg, st, check_expr(beta, arg))
        return None
    if isinstance(node, StmtSeq):
        check_stmt_catch_body(beta, node.first)
        check_stmt_catch_body(beta, node.second)
        return None
    if isinstance(node, Block):
        b0 = check_decl_glob(beta, node.decl)
        check_stmt_catch_body({**beta, **b0}, node.stmt)
        return None
    if isinstance(node, If):
        _expect("conditional", node.cond, SType.BOOLEAN, check_expr(beta, node.cond))
        check_stmt_catch_body(beta, node.then)
        check_stmt_catch_body(beta, node.orelse)
        return None
    if isinstance(node, While):
        _expect("while", node.cond, SType.BOOLEAN, check_expr(beta, node.cond))
        check_stmt_catch_body(beta, node.body)
        return None
    if isinstance(node, ThrowRts):
        return None
    if isinstance(node, ThrowExpr):
        check_expr(beta, node.expr)
        return None
    if isinstance(node, TryCatch):
        check_stmt_catch_body(beta, node.body)
        check_stmt_catch_body(beta, node.handlers)
        return None
    if isinstance(node, TryFinally):
        check_stmt_catch_body(beta, node.body)
        check_stmt_catch_body(beta, node.finalizer)
        return None
    if isinstance(node, Clause):
        delta = _pattern_env(node.pattern, node)
        check_stmt_catch_body({**beta, **delta}, node.stmt)
        return None
    if isinstance(node, CatchSeq):
        check_stmt_catch_body(beta, node.first)
        check_stmt_catch_body(beta, node.second)
        return None
    if isinstance(node, Let):
        b0 = check_decl_glob(beta, node.decl)
        inner = {**beta, **b0}
        check_stmt_catch_body(inner, node.stmt)
        return check_expr(inner, node.result)
    if isinstance(node, Extern):
        return node.stype
    raise CpmTypeError("statement", node, f"not a statement: {type(node).__name__}")


# ---------------------------------------------------------------- programs

MAIN_TYPE = FnType((), SType.INTEGER)


def _names(node):
    if isinstance(node, (Var, GVar, LVar, Function, Binder)):
        yield node.name
    if isinstance(node, Function):
        for n, _ in node.params:
            yield n
    if isinstance(node, Assign):
        yield node.target
    if isinstance(node, Call):
        yield node.target
        yield node.func
    if isinstance(node, Clause):
        yield from _names(node.pattern)


def check_program(program) -> dict:
    """Validate a program; return its type environment."""
    g = program.glob if isinstance(program, Program) else program
    for n in walk(g):
        if isinstance(n, (EnvLit, RecEnvLit)):
            raise ValidityError("ill-typed", "environment literals cannot appear in source programs")
        for name in _names(n):
            if is_reserved(name):
                raise ValidityError("reserved-identifier", f"reserved identifier {name!r} at label {n.label}")
    try:
        beta = check_decl_glob({}, g)
    except CpmTypeError as exc:
        raise ValidityError("ill-typed", str(exc), exc) from exc
    main = beta.get("main")
    if main is None:
        raise ValidityError("missing-or-wrong-main", "no function 'main' is declared")
    if main != MAIN_TYPE:
        raise ValidityError("missing-or-wrong-main", f"'main' has type {main}, expected () -> integer")
    return beta
