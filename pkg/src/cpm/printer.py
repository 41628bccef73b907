"""Pretty-printer producing text the parser reads back to the same tree."""

from __future__ import annotations

from .syntax import (
    And, AnyPattern, Arith, Assign, Binder, Block, BoolConst, Call, CatchSeq, Clause, Cmp,
    DeclSeq, EnvLit, Extern, Function, GlobSeq, GVar, If, IntConst, Let, LVar, Neg, Nil, Nop,
    Not, Or, Program, Rec, RecEnvLit, RtsPattern, StmtSeq, ThrowExpr, ThrowRts, TryCatch,
    TryFinally, TypePattern, Var, While,
)

# binding strength; higher binds tighter
_OR, _AND, _NOT, _CMP, _ADD, _MUL, _NEG, _ATOM = range(1, 9)
_ARITH_PREC = {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "%": _MUL}
_INDENT = "  "


def _prec(e) -> int:
    if isinstance(e, Or):
        return _OR
    if isinstance(e, And):
        return _AND
    if isinstance(e, Not):
        return _NOT
    if isinstance(e, Cmp):
        return _CMP
    if isinstance(e, Arith):
        return _ARITH_PREC[e.op]
    if isinstance(e, Neg):
        return _NEG
    if isinstance(e, IntConst) and e.value < 0:
        return _NEG
    return _ATOM


def _wrap(e, minimum: int) -> str:
    s = pretty_expr(e)
    return f"({s})" if _prec(e) < minimum else s


def pretty_expr(e) -> str:
    if isinstance(e, IntConst):
        return str(e.value)
    if isinstance(e, BoolConst):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        inner = pretty_expr(e.operand)
        # "--" would open a comment, and "-4" reads back as a literal
        if _prec(e.operand) < _ATOM or isinstance(e.operand, IntConst):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, Not):
        return "not " + _wrap(e.operand, _NOT)
    if isinstance(e, (Or, And)):
        p = _prec(e)
        kw = "or" if isinstance(e, Or) else "and"
        return f"{_wrap(e.left, p)} {kw} {_wrap(e.right, p + 1)}"
    if isinstance(e, Cmp):
        return f"{_wrap(e.left, _ADD)} {e.op} {_wrap(e.right, _ADD)}"
    if isinstance(e, Arith):
        p = _prec(e)
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    raise TypeError(f"not an expression: {e!r}")


def _pattern(p) -> str:
    if isinstance(p, AnyPattern):
        return "any"
    if isinstance(p, RtsPattern):
        return p.name
    if isinstance(p, TypePattern):
        return p.ctype
    if isinstance(p, Binder):
        return f"{p.name} : {p.stype}"
    raise TypeError(f"not a pattern: {p!r}")


def _refuse_runtime(node):
    if isinstance(node, (EnvLit, RecEnvLit)):
        raise ValueError("runtime environment literals have no concrete syntax")


def pretty_decl(d, ind: str = "") -> str:
    _refuse_runtime(d)
    if isinstance(d, Nil):
        return "nil"
    if isinstance(d, LVar):
        return f"lvar {d.name} : {d.stype} = {pretty_expr(d.init)}"
    if isinstance(d, DeclSeq):
        return f"{pretty_decl(d.first, ind)};\n{ind}{pretty_decl(d.second, ind)}"
    raise TypeError(f"not a declaration: {d!r}")


_SIMPLE = (Nop, Assign, Call, ThrowRts, ThrowExpr, Block)


def _nested(s, ind: str) -> str:
    """A statement in a position that only takes a single statement."""
    if isinstance(s, _SIMPLE):
        return pretty_stmt(s, ind)
    inner = ind + _INDENT
    return f"(\n{inner}{pretty_stmt(s, inner)}\n{ind})"


def pretty_stmt(s, ind: str = "") -> str:
    if isinstance(s, Nop):
        return "nop"
    if isinstance(s, Assign):
        return f"{s.target} := {pretty_expr(s.expr)}"
    if isinstance(s, Call):
        return f"{s.target} := {s.func}({', '.join(pretty_expr(a) for a in s.args)})"
    if isinstance(s, StmtSeq):
        first = _nested(s.first, ind) if isinstance(s.first, StmtSeq) else pretty_stmt(s.first, ind)
        return f"{first};\n{ind}{pretty_stmt(s.second, ind)}"
    if isinstance(s, Block):
        inner = ind + _INDENT
        return f"{{\n{inner}{pretty_decl(s.decl, inner)};\n{inner}{pretty_stmt(s.stmt, inner)}\n{ind}}}"
    if isinstance(s, If):
        return (f"if {pretty_expr(s.cond)} then {_nested(s.then, ind)}\n"
                f"{ind}else {_nested(s.orelse, ind)}")
    if isinstance(s, While):
        return f"while {pretty_expr(s.cond)} do {_nested(s.body, ind)}"
    if isinstance(s, ThrowRts):
        return f"throw {s.name}"
    if isinstance(s, ThrowExpr):
        return f"throw {pretty_expr(s.expr)}"
    if isinstance(s, TryCatch):
        return f"try {_nested(s.body, ind)}\n{ind}{pretty_catch(s.handlers, ind)}"
    if isinstance(s, TryFinally):
        return f"try {_nested(s.body, ind)}\n{ind}finally {_nested(s.finalizer, ind)}"
    raise TypeError(f"not a statement: {s!r}")


def pretty_catch(k, ind: str = "") -> str:
    if isinstance(k, Clause):
        return f"catch ({_pattern(k.pattern)}) {_nested(k.stmt, ind)}"
    if isinstance(k, CatchSeq):
        return f"{pretty_catch(k.first, ind)}\n{ind}{pretty_catch(k.second, ind)}"
    raise TypeError(f"not a catch clause: {k!r}")


def pretty_body(b, ind: str = "") -> str:
    if isinstance(b, Extern):
        return f"extern : {b.stype}"
    if isinstance(b, Let):
        inner = ind + _INDENT
        return (f"let {pretty_decl(b.decl, inner)}\n{ind}in\n{inner}{pretty_stmt(b.stmt, inner)}\n"
                f"{ind}result {pretty_expr(b.result)}")
    raise TypeError(f"not a body: {b!r}")


def pretty_glob(g, ind: str = "") -> str:
    _refuse_runtime(g)
    if isinstance(g, GVar):
        return f"gvar {g.name} : {g.stype} = {pretty_expr(g.init)}"
    if isinstance(g, Function):
        params = ", ".join(f"{n} : {t}" for n, t in g.params)
        return f"function {g.name}({params}) =\n{ind}{pretty_body(g.body, ind)}"
    if isinstance(g, Rec):
        inner = g.glob
        if isinstance(inner, GlobSeq):
            return f"rec (\n{pretty_glob(inner, ind)}\n{ind})"
        return f"rec {pretty_glob(inner, ind)}"
    if isinstance(g, GlobSeq):
        first = pretty_glob(g.first, ind)
        if isinstance(g.first, GlobSeq):
            first = f"(\n{first}\n)"
        return f"{first};\n\n{ind}{pretty_glob(g.second, ind)}"
    raise TypeError(f"not a global declaration: {g!r}")


def pretty(node) -> str:
    """Render any AST node (or a Program) as concrete syntax."""
    if isinstance(node, Program):
        return pretty_glob(node.glob) + "\n"
    if isinstance(node, (GVar, Function, Rec, GlobSeq)):
        return pretty_glob(node)
    if isinstance(node, (Let, Extern)):
        return pretty_body(node)
    if isinstance(node, (Clause, CatchSeq)):
        return pretty_catch(node)
    if isinstance(node, (Nil, LVar, DeclSeq, EnvLit, RecEnvLit)):
        return pretty_decl(node)
    if isinstance(node, (Nop, Assign, Call, StmtSeq, Block, If, While, ThrowRts, ThrowExpr,
                         TryCatch, TryFinally)):
        return pretty_stmt(node)
    return pretty_expr(node)
