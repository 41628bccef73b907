"""Big-step concrete interpreter with a step budget.

Every rule application consumes one unit of budget.  When the budget runs out
the evaluation stops with ``BudgetExhausted`` carrying the label of the phrase
being evaluated; nothing is claimed about such runs.

Result shapes:
    expressions   ``(value, Mem)`` or ``ExcState``
    declarations  ``(Env, Mem)`` or ``ExcState``
    statements    ``Mem`` or ``ExcState`` (bodies likewise)
    catch         ``(caught: bool, Mem | ExcState)``
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import memory as M
from .memory import ExcState, Mem, Rts
from .syntax import (
    And, AnyPattern, Arith, Assign, Binder, Block, BoolConst, Call, CatchSeq, Cell, Clause,
    Closure, Cmp, DeclSeq, EXTERN_EXCEPTION, EnvLit, Extern, Function, GlobSeq, GVar, If,
    IntConst, Let, LVar, Neg, Nil, Nop, Not, Or, Program, Rec, RecEnvLit, RtsPattern, SType,
    StmtSeq, ThrowExpr, ThrowRts, TryCatch, TryFinally, TypePattern, Var, While,
    defined_identifiers, extend, free_identifiers, remove, reserved, restrict, type_of,
)

DEFAULT_BUDGET = 10 ** 6


class ExternUnsupported(Exception):
    """A call reached an extern body under the ``reject`` policy."""


class InterpreterBug(AssertionError):
    """An internal invariant was violated (never a CPM-level outcome)."""


@dataclass(frozen=True)
class Completed:
    value: object


@dataclass(frozen=True)
class BudgetExhausted:
    label: int


class _OutOfBudget(Exception):
    def __init__(self, label):
        self.label = label


# ---------------------------------------------------------------- integer ops


def int_div(x: int, y: int) -> int:
    """x / y truncated toward zero, exactly."""
    q = abs(x) // abs(y)
    return q if (x >= 0) == (y > 0) else -q


def int_mod(x: int, y: int) -> int:
    return x - int_div(x, y) * y


CMP_FUNCS = {
    "=": lambda a, b: a == b,
    "<>": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def arith(op: str, x: int, y: int) -> int:
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    if op == "/":
        return int_div(x, y)
    return int_mod(x, y)


# ---------------------------------------------------------------- closures


def function_closure(env, fn: Function) -> Closure:
    """The closure a function declaration binds: the body's free identifiers are
    captured by prepending ``rho|I`` to its declaration."""
    body = fn.body
    if isinstance(body, Extern):
        return Closure(fn.params, body)
    captured = free_identifiers(body) - defined_identifiers(fn.params)
    decl = DeclSeq(EnvLit(restrict(env, captured)), body.decl)
    return Closure(fn.params, Let(decl, body.stmt, body.result))


class RecUnfolder:
    """Builds the environment ``rec rho0`` denotes.

    Unfolding is memoized on the identity of the closures involved, so
    unfolding equal environments again yields the very same closure objects
    (and therefore stable phrase labels for the synthesized bodies).
    """

    def __init__(self):
        self._cache: dict = {}
        self._keep: list = []

    def unfold(self, env) -> dict:
        key = tuple(sorted((k, id(v)) for k, v in env.items()))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        self._keep.append(env)
        out: dict = {}
        self._cache[key] = out
        for name, v in env.items():
            if isinstance(v, Closure) and isinstance(v.body, Let):
                b = v.body
                inner = RecEnvLit(remove(env, defined_identifiers(v.params)))
                out[name] = Closure(v.params, Let(DeclSeq(inner, b.decl), b.stmt, b.result))
            else:
                out[name] = v
        return out


def call_decl(call: Call, ret_type: SType, params: tuple):
    """d = lvar x0 : sT0 = id0; lvar x1 : sT1 = e1; ...; lvar xn : sTn = en."""
    items = [LVar(reserved(0), ret_type, Var(call.target))]
    for j, (arg, (_, st)) in enumerate(zip(call.args, params), start=1):
        items.append(LVar(reserved(j), st, arg))
    d = items[-1]
    for it in reversed(items[:-1]):
        d = DeclSeq(it, d)
    return d


# ---------------------------------------------------------------- interpreter


@dataclass
class Interpreter:
    budget: int = DEFAULT_BUDGET
    extern_policy: str = "reject"  # or "havoc-error"
    trace: Optional[Callable] = None  # called as trace(rule, label, mem)
    record: Optional[dict] = None  # label -> list of statement entry memories
    steps: int = 0
    unfolder: RecUnfolder = field(default_factory=RecUnfolder)
    _call_decls: dict = field(default_factory=dict)

    def _step(self, rule: str, node, mem):
        self.steps += 1
        if self.steps > self.budget:
            raise _OutOfBudget(node.label)
        if self.trace is not None:
            self.trace(rule, node.label, mem)

    # -- expressions
    def expr(self, env, e, mem: Mem):
        self._step("expr", e, mem)
        if isinstance(e, IntConst):
            return e.value, mem
        if isinstance(e, BoolConst):
            return e.value, mem
        if isinstance(e, Var):
            cell = env[e.name]
            return M.read(mem, cell.addr, cell.stype)
        if isinstance(e, Neg):
            r = self.expr(env, e.operand, mem)
            if isinstance(r, ExcState):
                return r
            return -r[0], r[1]
        if isinstance(e, (Arith, Cmp)):
            r0 = self.expr(env, e.left, mem)
            if isinstance(r0, ExcState):
                return r0
            r1 = self.expr(env, e.right, r0[1])
            if isinstance(r1, ExcState):
                return r1
            x, (y, m1) = r0[0], r1
            if isinstance(e, Cmp):
                return CMP_FUNCS[e.op](x, y), m1
            if e.op in ("/", "%") and y == 0:
                return ExcState(m1, Rts("divbyzero"))
            return arith(e.op, x, y), m1
        if isinstance(e, Not):
            r = self.expr(env, e.operand, mem)
            if isinstance(r, ExcState):
                return r
            return (not r[0]), r[1]
        if isinstance(e, (And, Or)):
            r0 = self.expr(env, e.left, mem)
            if isinstance(r0, ExcState):
                return r0
            b0, m0 = r0
            if isinstance(e, And) and not b0:
                return False, m0
            if isinstance(e, Or) and b0:
                return True, m0
            return self.expr(env, e.right, m0)
        raise InterpreterBug(f"not an expression: {e!r}")

    # -- declarations
    def decl(self, env, d, mem: Mem):
        self._step("decl", d, mem)
        if isinstance(d, Nil):
            return {}, mem
        if isinstance(d, EnvLit):
            return dict(d.env), mem
        if isinstance(d, RecEnvLit):
            return self.unfolder.unfold(d.env), mem
        if isinstance(d, GVar):
            r = self.expr(env, d.init, mem)
            if isinstance(r, ExcState):
                return M.cleanup_data(r)
            a = M.new_data(r[1], r[0])
            if isinstance(a, ExcState):
                return M.cleanup_data(a)
            return {d.name: Cell(a[1], d.stype)}, a[0]
        if isinstance(d, LVar):
            r = self.expr(env, d.init, mem)
            if isinstance(r, ExcState):
                return M.lift(M.unmark, r)
            a = M.new_stack(r[1], r[0])
            if isinstance(a, ExcState):
                return M.lift(M.unmark, a)
            return {d.name: Cell(a[1], d.stype)}, a[0]
        if isinstance(d, Function):
            return {d.name: function_closure(env, d)}, mem
        if isinstance(d, Rec):
            j = free_identifiers(d.glob) & defined_identifiers(d.glob)
            r = self.decl(remove(env, j), d.glob, mem)
            if isinstance(r, ExcState):
                return r
            return self.unfolder.unfold(r[0]), r[1]
        if isinstance(d, (DeclSeq, GlobSeq)):
            r0 = self.decl(env, d.first, mem)
            if isinstance(r0, ExcState):
                return r0
            r1 = self.decl(extend(env, r0[0]), d.second, r0[1])
            if isinstance(r1, ExcState):
                return r1
            return extend(r0[0], r1[0]), r1[1]
        raise InterpreterBug(f"not a declaration: {d!r}")

    # -- statements
    def stmt(self, env, s, mem: Mem):
        if self.record is not None:
            self.record.setdefault(s.label, []).append(mem)
        self._step("stmt", s, mem)
        if isinstance(s, Nop):
            return mem
        if isinstance(s, Assign):
            r = self.expr(env, s.expr, mem)
            if isinstance(r, ExcState):
                return r
            cell = env[s.target]
            return M.write(r[1], (cell.addr, cell.stype), r[0])
        if isinstance(s, StmtSeq):
            r = self.stmt(env, s.first, mem)
            if isinstance(r, ExcState):
                return r
            return self.stmt(env, s.second, r)
        if isinstance(s, Block):
            r = self.decl(env, s.decl, M.mark(mem))
            if isinstance(r, ExcState):
                return r
            return M.lift(M.unmark, self.stmt(extend(env, r[0]), s.stmt, r[1]))
        if isinstance(s, If):
            r = self.expr(env, s.cond, mem)
            if isinstance(r, ExcState):
                return r
            return self.stmt(env, s.then if r[0] else s.orelse, r[1])
        if isinstance(s, While):
            while True:
                r = self.expr(env, s.cond, mem)
                if isinstance(r, ExcState):
                    return r
                if not r[0]:
                    return r[1]
                mem = self.stmt(env, s.body, r[1])
                if isinstance(mem, ExcState):
                    return mem
                self._step("stmt", s, mem)
                if self.record is not None:
                    self.record.setdefault(s.label, []).append(mem)
        if isinstance(s, ThrowRts):
            return ExcState(mem, Rts(s.name))
        if isinstance(s, ThrowExpr):
            r = self.expr(env, s.expr, mem)
            if isinstance(r, ExcState):
                return r
            return ExcState(r[1], r[0])
        if isinstance(s, TryCatch):
            r = self.stmt(env, s.body, mem)
            if not isinstance(r, ExcState):
                return r
            return self.catch(env, s.handlers, r)[1]
        if isinstance(s, TryFinally):
            r0 = self.stmt(env, s.body, mem)
            if not isinstance(r0, ExcState):
                return self.stmt(env, s.finalizer, r0)
            r1 = self.stmt(env, s.finalizer, r0.mem)
            if isinstance(r1, ExcState):
                return r1
            return ExcState(r1, r0.exc)
        if isinstance(s, Call):
            return self.call(env, s, mem)
        raise InterpreterBug(f"not a statement: {s!r}")

    def call(self, env, s: Call, mem: Mem):
        closure = env[s.func]
        ret_type = env[s.target].stype
        d = self._call_decls.get(s.label)
        if d is None:
            d = self._call_decls[s.label] = call_decl(s, ret_type, closure.params)
        r = self.decl(env, d, M.mark(mem))
        if isinstance(r, ExcState):
            return r
        rho0, sigma0 = r
        rho1 = {reserved(0): Cell(0, ret_type)}
        for j, (name, st) in enumerate(closure.params, start=1):
            rho1[name] = Cell(j, st)
        r1 = self.body(extend(env, rho1), closure.body, M.link(sigma0))
        if isinstance(r1, ExcState):
            return M.lift(M.unmark, M.lift(M.unlink, r1))
        back = Assign(s.target, Var(reserved(0)), label=s.label)
        r2 = self._assign(extend(env, rho0), back, M.unlink(r1))
        return M.lift(M.unmark, r2)

    def _assign(self, env, s: Assign, mem: Mem):
        self._step("stmt", s, mem)
        r = self.expr(env, s.expr, mem)
        if isinstance(r, ExcState):
            return r
        cell = env[s.target]
        return M.write(r[1], (cell.addr, cell.stype), r[0])

    # -- bodies
    def body(self, env, b, mem: Mem):
        self._step("body", b, mem)
        if isinstance(b, Extern):
            if self.extern_policy == "reject":
                raise ExternUnsupported("call to an extern function under the 'reject' policy")
            return ExcState(mem, Rts(EXTERN_EXCEPTION))
        r = self.decl(env, b.decl, M.mark(mem))
        if isinstance(r, ExcState):
            return r
        inner = extend(env, r[0])
        r1 = self.stmt(inner, b.stmt, r[1])
        if isinstance(r1, ExcState):
            return M.lift(M.unmark, r1)
        back = Assign(reserved(0), b.result, label=b.label)
        return M.lift(M.unmark, self._assign(inner, back, r1))

    # -- catch clauses
    def catch(self, env, k, exc: ExcState):
        self._step("catch", k, exc.mem)
        if isinstance(k, CatchSeq):
            caught, r = self.catch(env, k.first, exc)
            if caught:
                return True, r
            return self.catch(env, k.second, r)
        p, xi = k.pattern, exc.exc
        ctype = "rts_exception" if isinstance(xi, Rts) else type_of(xi).value
        if (isinstance(p, AnyPattern)
                or (isinstance(p, RtsPattern) and isinstance(xi, Rts) and p.name == xi.name)
                or (isinstance(p, TypePattern) and p.ctype == ctype)):
            return True, self.stmt(env, k.stmt, exc.mem)
        if isinstance(p, Binder) and not isinstance(xi, Rts) and p.stype == type_of(xi):
            a = M.new_stack(M.mark(exc.mem), xi)
            if isinstance(a, ExcState):
                return True, M.lift(M.unmark, a)
            sigma0, i = a
            r = self.stmt(extend(env, {p.name: Cell(i, p.stype)}), k.stmt, sigma0)
            return True, M.lift(M.unmark, r)
        return False, exc


# ---------------------------------------------------------------- entry points


def _run(fn):
    try:
        return Completed(fn())
    except _OutOfBudget as exc:
        return BudgetExhausted(exc.label)


def eval_expr(env, e, mem: Mem, budget: int = DEFAULT_BUDGET, **kw):
    it = Interpreter(budget=budget, **kw)
    return _run(lambda: it.expr(env, e, mem))


def eval_decl(env, d, mem: Mem, budget: int = DEFAULT_BUDGET, **kw):
    it = Interpreter(budget=budget, **kw)
    return _run(lambda: it.decl(env, d, mem))


def eval_stmt(env, s, mem: Mem, budget: int = DEFAULT_BUDGET, **kw):
    it = Interpreter(budget=budget, **kw)
    return _run(lambda: it.stmt(env, s, mem))


def eval_body(env, b, mem: Mem, budget: int = DEFAULT_BUDGET, **kw):
    it = Interpreter(budget=budget, **kw)
    return _run(lambda: it.body(env, b, mem))


def eval_catch(env, k, exc: ExcState, budget: int = DEFAULT_BUDGET, **kw):
    it = Interpreter(budget=budget, **kw)
    return _run(lambda: it.catch(env, k, exc))


@dataclass(frozen=True)
class ProgramResult:
    """Outcome of a complete run: exactly one of ``exit_value``/``exception`` is set."""

    exit_value: Optional[int]
    exception: object
    memory: Mem
    globals_env: Optional[dict] = None  # environment after the global declaration
    globals_mem: Optional[Mem] = None
    final: object = None  # the driver's terminal: Mem or ExcState

    def describe(self) -> str:
        if self.exception is None:
            return f"exit {self.exit_value}"
        return f"exception {M.show_value(self.exception) if not isinstance(self.exception, Rts) else self.exception}"


def driver_decl(g):
    """g; gvar x : integer = 0"""
    return GlobSeq(g, GVar(reserved(), SType.INTEGER, IntConst(0)))


def driver_call():
    """x := main()"""
    return Call(reserved(), "main", ())


def run_in_deep_stack(fn, stack_mb: int = 512, recursion: int = 200_000):
    """Run ``fn`` on a worker thread with a large native stack (deep CPM recursion
    maps onto host recursion)."""
    box: dict = {}

    def target():
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, recursion))
        try:
            box["value"] = fn()
        except BaseException as exc:  # re-raised on the caller's thread
            box["error"] = exc

    prev = threading.stack_size()
    threading.stack_size(stack_mb * 1024 * 1024)
    try:
        t = threading.Thread(target=target)
        t.start()
        t.join()
    finally:
        threading.stack_size(prev)
    if "error" in box:
        raise box["error"]
    return box["value"]


def run_program(program, budget: int = DEFAULT_BUDGET, *,
                 data_capacity: int = M.DEFAULT_DATA_CAPACITY,
                 stack_capacity: int = M.DEFAULT_STACK_CAPACITY,
                 extern_policy: str = "reject", trace=None, record=None,
                 deep: bool = True):
    """Run a valid program: evaluate the globals, then ``x := main()``."""
    g = program.glob if isinstance(program, Program) else program
    it = Interpreter(budget=budget, extern_policy=extern_policy, trace=trace, record=record)

    def go():
        mem0 = M.initial_memory(data_capacity, stack_capacity)
        r = it.decl({}, driver_decl(g), mem0)
        if isinstance(r, ExcState):
            return ProgramResult(None, r.exc, r.mem, final=r)
        env, mem = r
        out = it.stmt(env, driver_call(), mem)
        if isinstance(out, ExcState):
            return ProgramResult(None, out.exc, out.mem, env, mem, out)
        value, _ = M.read(out, env[reserved()].addr, SType.INTEGER)
        return ProgramResult(value, None, out, env, mem, out)

    return _run(lambda: run_in_deep_stack(go) if deep else go())
