"""Abstract interpreter.

Abstract rules mirror the concrete ones with memories replaced by abstract
memories and with every outcome component joined.  Derivations are finite
because of a repetition check at cut points (``while`` statements and
function bodies):

(i)   no active ancestor with the same label: expand the rule;
(ii)  an active ancestor's input subsumes ours: reuse its current conclusion
      iterate instead of expanding;
(iii) otherwise: widen the input against the nearest ancestor's and expand.

Each cut point iterates its conclusion from bottom until it stops growing
(widening iterates after a delay), so repetition nodes see a post-fixpoint.

Result shapes (``None`` is bottom throughout):
    expressions   ``(AValState | None, AExcState | None)``
    declarations  ``(env | None, AbsMem | None, AExcState | None)``
    statements    ``(AbsMem | None, AExcState | None)`` (bodies likewise)
    catch         ``((AbsMem | None, AExcState | None), AExcState | None)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import absmem as A
from .absmem import AExcState, AValState, AbsMem, estate, join_estate, join_mem, vstate
from .domains import AbsExc, AbsVal, BOOL_BOT, EXC_TOP, FF, INT_BOT, Interval, TT
from .interp import RecUnfolder, call_decl, driver_call, driver_decl, function_closure, run_in_deep_stack
from .memory import DEFAULT_DATA_CAPACITY, DEFAULT_STACK_CAPACITY, initial_memory
from .plugins import DomainPlugin, NoPlugin
from .syntax import (
    And, Arith, Assign, Binder, Block, BoolConst, Call, CatchSeq, Cell, Clause, Closure, Cmp,
    DeclSeq, EnvLit, Extern, Function, GlobSeq, GVar, If, IntConst, Let, LVar, Neg, Nil, Nop,
    Not, Or, Program, Rec, RecEnvLit, SType, StmtSeq, ThrowExpr, ThrowRts, TryCatch, TryFinally,
    Var, While, defined_identifiers, extend, free_identifiers, remove, reserved, walk,
    STMT_TYPES,
)

TRACKED = ("divbyzero", "memerror", "stkovflw", "datovflw", "externcall")


class IterationCapExceeded(RuntimeError):
    """The analysis did not stabilize within ``max_iterations`` expansions."""

    def __init__(self, label, count):
        self.label = label
        self.count = count
        super().__init__(f"no fixpoint after {count} expansions (at label {label})")


@dataclass(frozen=True)
class AnalysisConfig:
    widening_delay: int = 0
    max_iterations: int = 200_000
    plugin: DomainPlugin = field(default_factory=NoPlugin)
    memoize: bool = True
    data_capacity: int = DEFAULT_DATA_CAPACITY
    stack_capacity: int = DEFAULT_STACK_CAPACITY

    def echo(self) -> dict:
        return {
            "widening_delay": self.widening_delay,
            "max_iterations": self.max_iterations,
            "plugin": type(self.plugin).__name__,
            "memoize": self.memoize,
            "data_capacity": self.data_capacity,
            "stack_capacity": self.stack_capacity,
        }


# ---------------------------------------------------------------- statement terminals


def join_st(a, b):
    return join_mem(a[0], b[0]), join_estate(a[1], b[1])


def widen_st(a, b):
    return A.widen_mem(a[0], b[0]), A.widen_estate(a[1], b[1])


def leq_st(a, b) -> bool:
    return A.leq_mem(a[0], b[0]) and A.leq_estate(a[1], b[1])


BOT_ST = (None, None)


@dataclass
class _Entry:
    key: tuple
    input: AbsMem
    pos: int
    conclusion: tuple = BOT_ST
    used: bool = False
    low: int = 0


# ---------------------------------------------------------------- the analyzer


class Analyzer:
    def __init__(self, config: AnalysisConfig | None = None):
        self.config = config or AnalysisConfig()
        self.plugin = self.config.plugin
        self.unfolder = RecUnfolder()
        self.expansions = 0
        self.entries: list = []  # stack of active cut-point entries
        self.active: dict = {}  # key -> list of entries (nearest last)
        self.memo: dict = {}  # key -> list of (input, conclusion)
        self.seen: dict = {}  # statement label -> joined input memory
        self.post: dict = {}  # statement label -> joined result (mem, exc)
        self.origins: dict = {name: set() for name in TRACKED}
        self._cur = 0  # innermost source statement label
        self._pin: list = []
        self._fi: dict = {}
        self._synth: dict = {}

    # -- helpers
    def _origin(self, node) -> int:
        lab = getattr(node, "label", 0)
        return lab if lab > 0 else self._cur

    def _note(self, node, state: Optional[AExcState]):
        if state is None:
            return
        lab = self._origin(node)
        for name in TRACKED:
            if state.exc.rts.contains(name):
                self.origins[name].add(lab)

    def _fingerprint(self, env, node) -> tuple:
        fi = self._fi.get(id(node))
        if fi is None:
            fi = self._fi[id(node)] = (node, tuple(sorted(free_identifiers(node) | {reserved(0)})))
        out = []
        for name in fi[1]:
            v = env.get(name)
            if isinstance(v, Closure):
                self._pin.append(v)
                v = ("closure", id(v))
            out.append((name, v))
        return tuple(out)

    def _cached(self, key, build):
        node = self._synth.get(key)
        if node is None:
            node = self._synth[key] = build()
        return node

    # -- the three-case algorithm
    def cut(self, env, node, mem: Optional[AbsMem], expand):
        if mem is None:
            return BOT_ST
        key = (node.label, id(node), self._fingerprint(env, node))
        anc = self.active.get(key)
        if anc:
            m = anc[-1]
            if A.leq_mem(mem, m.input):
                m.used = True
                top = self.entries[-1]
                top.low = min(top.low, m.pos)
                return m.conclusion
            if len(anc) <= self.config.widening_delay:
                mem = join_mem(m.input, mem)
            else:
                mem = A.widen_mem(m.input, join_mem(m.input, mem))
        if self.config.memoize:
            for inp, concl in self.memo.get(key, ()):
                if inp == mem:
                    return concl
        entry = _Entry(key, mem, len(self.entries))
        entry.low = entry.pos
        self.entries.append(entry)
        self.active.setdefault(key, []).append(entry)
        rounds = 0
        try:
            while True:
                self.expansions += 1
                if self.expansions > self.config.max_iterations:
                    raise IterationCapExceeded(node.label, self.expansions)
                entry.used = False
                r = expand(mem)
                if not entry.used:
                    break
                if leq_st(r, entry.conclusion):
                    r = entry.conclusion
                    break
                rounds += 1
                joined = join_st(entry.conclusion, r)
                entry.conclusion = joined if rounds <= self.config.widening_delay else widen_st(entry.conclusion, joined)
        finally:
            self.entries.pop()
            self.active[key].pop()
            if not self.active[key]:
                del self.active[key]
        if self.entries:
            parent = self.entries[-1]
            parent.low = min(parent.low, entry.low)
        if self.config.memoize and entry.low >= entry.pos:
            self.memo.setdefault(key, []).append((mem, r))
        return r

    # -- plugin seam
    def _plugin(self, env, node, mem, result):
        """The conclusion, replaced by the plugin's when it supports the phrase."""
        if mem is not None and self.plugin.supported(env, node, mem):
            return self.plugin.eval(env, node, mem)
        return result

    # -- expressions
    def expr(self, env, e, mem: Optional[AbsMem]):
        if mem is None:
            return None, None
        return self._plugin(env, e, mem, self._expr(env, e, mem))

    def _expr(self, env, e, mem: AbsMem):
        if isinstance(e, IntConst):
            return vstate(AbsVal.of_int(Interval.const(e.value)), mem), None
        if isinstance(e, BoolConst):
            return vstate(AbsVal.of_bool(TT if e.value else FF), mem), None
        if isinstance(e, Var):
            c = env[e.name]
            v, err = A.a_read(mem, c.addr, c.stype)
            self._note(e, err)
            return v, err
        if isinstance(e, Neg):
            v, err = self.expr(env, e.operand, mem)
            return (None if v is None else vstate(AbsVal.of_int(v.val.ints.neg()), v.mem)), err
        if isinstance(e, (Arith, Cmp)):
            v0, err0 = self.expr(env, e.left, mem)
            v1, err1 = self.expr(env, e.right, None if v0 is None else v0.mem)
            err = join_estate(err0, err1)
            if v0 is None or v1 is None:
                return None, err
            a, b = v0.val.ints, v1.val.ints
            if isinstance(e, Cmp):
                return vstate(AbsVal.of_bool(a.cmp(e.op, b)), v1.mem), err
            if e.op in ("/", "%") and b.contains(0):
                dz = AExcState(v1.mem, AbsExc.rts_of("divbyzero"))
                self._note(e, dz)
                err = join_estate(err, dz)
            res = {"+": a.add, "-": a.sub, "*": a.mul, "/": a.div, "%": a.mod}[e.op](b)
            return vstate(AbsVal.of_int(res), v1.mem), err
        if isinstance(e, Not):
            v, err = self.expr(env, e.operand, mem)
            return (None if v is None else vstate(AbsVal.of_bool(v.val.bools.neg()), v.mem)), err
        if isinstance(e, (And, Or)):
            short = isinstance(e, Or)  # the left value that decides the result
            _, err0 = self.expr(env, e.left, mem)
            go_on = A.filter_guard(env, mem, e.left, not short)
            stop = A.filter_guard(env, mem, e.left, short)
            v1, err1 = self.expr(env, e.right, go_on)
            early = vstate(AbsVal.of_bool(TT if short else FF), stop)
            return A.join_vstate(early, v1), join_estate(err0, err1)
        raise TypeError(f"not an expression: {e!r}")

    # -- declarations
    def decl(self, env, d, mem: Optional[AbsMem]):
        if mem is None:
            return None, None, None
        rho, m, err = self._decl(env, d, mem)
        if m is not None and self.plugin.supported(env, d, mem):
            return self.plugin.eval(env, d, mem)
        return rho, m, err

    def _decl(self, env, d, mem: AbsMem):
        if isinstance(d, Nil):
            return {}, mem, None
        if isinstance(d, EnvLit):
            return dict(d.env), mem, None
        if isinstance(d, RecEnvLit):
            return self.unfolder.unfold(d.env), mem, None
        if isinstance(d, (GVar, LVar)):
            v, err0 = self.expr(env, d.init, mem)
            if v is None:
                ok, err1 = None, None
            else:
                val = AbsVal(v.val.ints, BOOL_BOT) if d.stype == SType.INTEGER else AbsVal(INT_BOT, v.val.bools)
                if isinstance(d, GVar):
                    ok, err1 = A.new_data(v.mem, val)
                else:
                    ok, err1 = A.new_stack(v.mem, val, d.stype)
                self._note(d, err1)
            err = join_estate(err0, err1)
            err = A.cleanup_data(err) if isinstance(d, GVar) else A.lift_exc(A.unmark, err)
            if ok is None:
                return None, None, err
            return {d.name: Cell(ok[1], d.stype)}, ok[0], err
        if isinstance(d, Function):
            return {d.name: function_closure(env, d)}, mem, None
        if isinstance(d, Rec):
            j = free_identifiers(d.glob) & defined_identifiers(d.glob)
            rho0, m0, err = self.decl(remove(env, j), d.glob, mem)
            if rho0 is None:
                return None, None, err
            return self.unfolder.unfold(rho0), m0, err
        if isinstance(d, (DeclSeq, GlobSeq)):
            rho0, m0, err0 = self.decl(env, d.first, mem)
            if rho0 is None:
                return None, None, err0
            rho1, m1, err1 = self.decl(extend(env, rho0), d.second, m0)
            err = join_estate(err0, err1)
            if rho1 is None:
                return None, None, err
            return extend(rho0, rho1), m1, err
        raise TypeError(f"not a declaration: {d!r}")

    # -- statements
    def stmt(self, env, s, mem: Optional[AbsMem]):
        if s.label > 0:
            self.seen[s.label] = join_mem(self.seen.get(s.label), mem)
        if mem is None:
            return BOT_ST
        saved = self._cur
        if s.label > 0:
            self._cur = s.label
        try:
            if isinstance(s, While):
                r = self.cut(env, s, mem, lambda m: self._while(env, s, m))
            else:
                r = self._stmt(env, s, mem)
            r = self._plugin(env, s, mem, r)
        finally:
            self._cur = saved
        if s.label > 0:
            self.post[s.label] = join_st(self.post.get(s.label, BOT_ST), r)
        return r

    def _while(self, env, s: While, mem: AbsMem):
        _, err0 = self.expr(env, s.cond, mem)
        m_tt = A.filter_guard(env, mem, s.cond, True)
        m_ff = A.filter_guard(env, mem, s.cond, False)
        m1, err1 = self.stmt(env, s.body, m_tt)
        m2, err2 = self.stmt(env, s, m1)
        return join_mem(m_ff, m2), A.join_all_estates(err0, err1, err2)

    def _stmt(self, env, s, mem: AbsMem):
        if isinstance(s, Nop):
            return mem, None
        if isinstance(s, Assign):
            return self._assign(env, s, mem)
        if isinstance(s, StmtSeq):
            m0, err0 = self.stmt(env, s.first, mem)
            m1, err1 = self.stmt(env, s.second, m0)
            return m1, join_estate(err0, err1)
        if isinstance(s, Block):
            rho0, m0, err0 = self.decl(env, s.decl, A.mark(mem))
            if rho0 is None:
                return None, err0
            m1, err1 = self.stmt(extend(env, rho0), s.stmt, m0)
            return A.unmark(m1), join_estate(err0, A.lift_exc(A.unmark, err1))
        if isinstance(s, If):
            _, err0 = self.expr(env, s.cond, mem)
            m1, err1 = self.stmt(env, s.then, A.filter_guard(env, mem, s.cond, True))
            m2, err2 = self.stmt(env, s.orelse, A.filter_guard(env, mem, s.cond, False))
            return join_mem(m1, m2), A.join_all_estates(err0, err1, err2)
        if isinstance(s, ThrowRts):
            err = AExcState(mem, AbsExc.rts_of(s.name))
            self._note(s, err)
            return None, err
        if isinstance(s, ThrowExpr):
            v, err0 = self.expr(env, s.expr, mem)
            err1 = None if v is None else estate(v.mem, AbsExc(A.RTS_BOT, v.val))
            return None, join_estate(err0, err1)
        if isinstance(s, TryCatch):
            m0, err0 = self.stmt(env, s.body, mem)
            (m1, err1), err2 = self.catch(env, s.handlers, err0)
            return join_mem(m0, m1), join_estate(err1, err2)
        if isinstance(s, TryFinally):
            m0, err0 = self.stmt(env, s.body, mem)
            m2, err2 = self.stmt(env, s.finalizer, m0)
            m3, err3 = self.stmt(env, s.finalizer, A.mem_of(err0))
            reraised = None if err0 is None else estate(m3, err0.exc)
            return m2, A.join_all_estates(err2, err3, reraised)
        if isinstance(s, Call):
            return self.call(env, s, mem)
        raise TypeError(f"not a statement: {s!r}")

    def _assign(self, env, s: Assign, mem: AbsMem):
        v, err0 = self.expr(env, s.expr, mem)
        if v is None:
            return None, err0
        c = env[s.target]
        m1, err1 = A.a_write(v.mem, (c.addr, c.stype), v.val)
        self._note(s, err1)
        return m1, join_estate(err0, err1)

    def call(self, env, s: Call, mem: AbsMem):
        closure = env[s.func]
        ret_type = env[s.target].stype
        d = self._cached(("call", s.label, id(s)), lambda: call_decl(s, ret_type, closure.params))
        rho0, m0, err0 = self.decl(env, d, A.mark(mem))
        if rho0 is None:
            return None, err0
        rho1 = {reserved(0): Cell(0, ret_type)}
        for j, (name, st) in enumerate(closure.params, start=1):
            rho1[name] = Cell(j, st)
        linked = A.link(m0)
        m1, err1 = self.body(extend(env, rho1), closure.body, linked)
        back = self._cached(("back", s.label, id(s)), lambda: Assign(s.target, Var(reserved(0)), label=s.label))
        m2, err2 = (None, None) if m1 is None else self._assign(extend(env, rho0), back, A.unlink(m1, linked))
        err1 = None if err1 is None else estate(A.unmark(A.unlink(err1.mem, linked)), err1.exc)
        return A.unmark(m2), A.join_all_estates(err0, err1, A.lift_exc(A.unmark, err2))

    # -- bodies
    def body(self, env, b, mem: Optional[AbsMem]):
        if mem is None:
            return BOT_ST
        if isinstance(b, Extern):
            m0 = A.havoc(mem)
            err = AExcState(m0, EXC_TOP)
            self._note(b, err)
            return self._plugin(env, b, mem, (m0, err))
        return self._plugin(env, b, mem, self.cut(env, b, mem, lambda m: self._let(env, b, m)))

    def _let(self, env, b: Let, mem: AbsMem):
        rho0, m0, err0 = self.decl(env, b.decl, A.mark(mem))
        if rho0 is None:
            return None, err0
        inner = extend(env, rho0)
        m1, err1 = self.stmt(inner, b.stmt, m0)
        back = self._cached(("result", b.label, id(b)), lambda: Assign(reserved(0), b.result, label=b.label))
        m2, err2 = (None, None) if m1 is None else self._assign(inner, back, m1)
        return A.unmark(m2), join_estate(err0, A.lift_exc(A.unmark, join_estate(err1, err2)))

    # -- catch clauses
    def catch(self, env, k, err: Optional[AExcState]):
        if err is None:
            return BOT_ST, None
        if isinstance(k, CatchSeq):
            (m0, e0), rest = self.catch(env, k.first, err)
            (m1, e2), e3 = self.catch(env, k.second, rest)
            return (join_mem(m0, m1), join_estate(e0, e2)), e3
        p = k.pattern
        caught, rest = A.filter_exception(p, err)
        if not isinstance(p, Binder):
            return self.stmt(env, k.stmt, A.mem_of(caught)), rest
        if caught is None:
            return BOT_ST, rest
        part = A.sel(p.stype.value, caught)
        val = AbsVal.of_bool(part) if p.stype == SType.BOOLEAN else AbsVal.of_int(part)
        ok, e2 = A.new_stack(A.mark(caught.mem), val, p.stype)
        self._note(k, e2)
        m3, e3 = (None, None) if ok is None else self.stmt(extend(env, {p.name: Cell(ok[1], p.stype)}), k.stmt, ok[0])
        return (A.unmark(m3), join_estate(A.lift_exc(A.unmark, e2), A.lift_exc(A.unmark, e3))), rest


# ---------------------------------------------------------------- programs and reports


def _render_st(mem, err) -> tuple:
    return A.render_mem(mem), A.render_exc(err)


@dataclass
class Report:
    labels: list
    verdicts: dict
    exit: str
    exception: str
    config_echo: dict
    # raw results (not serialized)
    analyzer: Analyzer = field(repr=False, default=None)
    globals_env: Optional[dict] = field(repr=False, default=None)
    globals_mem: Optional[AbsMem] = field(repr=False, default=None)
    globals_exc: Optional[AExcState] = field(repr=False, default=None)
    final: tuple = field(repr=False, default=BOT_ST)
    exit_value: Interval = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "labels": self.labels,
            "verdicts": self.verdicts,
            "exit": self.exit,
            "exception": self.exception,
            "config_echo": self.config_echo,
        }

    def verdict(self, kind: str) -> str:
        return self.verdicts[kind]["verdict"]

    @property
    def has_findings(self) -> bool:
        return any(self.verdicts[k]["verdict"] == "possible"
                   for k in ("divbyzero", "memerror", "stack_overflow", "uncaught"))

    def text(self) -> str:
        lines = [f"{'label':>6} {'line:col':>9}  memory / exceptions"]
        for row in self.labels:
            lines.append(f"{row['label']:>6} {row['line']:>5}:{row['col']:<3}  {row['mem']}")
            if row["except"] != "none":
                lines.append(f"{'':>17}raises {row['except']}")
        lines.append("")
        for kind in ("divbyzero", "memerror", "stack_overflow", "uncaught"):
            v = self.verdicts[kind]
            where = f" at {', '.join(map(str, v['labels']))}" if v.get("labels") else ""
            extra = f" ({v['exceptions']})" if v.get("exceptions") else ""
            lines.append(f"{kind:<15} {v['verdict']}{where}{extra}")
        lines.append(f"{'unreachable':<15} {', '.join(map(str, self.verdicts['unreachable'])) or 'none'}")
        lines.append(f"{'exit':<15} {self.exit}")
        return "\n".join(lines)


def _verdict(origins) -> dict:
    """Synthesized phrases (the driver's global, call plumbing outside any
    statement) have no source label; they still make the error possible."""
    return {"verdict": "possible" if origins else "impossible",
            "labels": sorted(l for l in origins if l > 0)}


def analyze_program(program, config: AnalysisConfig | None = None, *, deep: bool = True) -> Report:
    """Analyze ``g; gvar x = 0`` then ``x := main()`` from the abstract empty memory."""
    config = config or AnalysisConfig()
    g = program.glob if isinstance(program, Program) else program
    an = Analyzer(config)

    def go():
        m0 = A.alpha_mem(initial_memory(config.data_capacity, config.stack_capacity))
        rho, mg, err0 = an.decl({}, driver_decl(g), m0)
        m1, err1 = an.stmt(rho, driver_call(), mg) if rho is not None else BOT_ST
        return rho, mg, err0, m1, err1

    rho, mg, err0, m1, err1 = run_in_deep_stack(go) if deep else go()
    exit_val = INT_BOT
    if m1 is not None:
        v, _ = A.a_read(m1, rho[reserved()].addr, SType.INTEGER)
        if v is not None:
            exit_val = v.val.ints
    uncaught = join_estate(err0, err1)

    stmts = [n for n in walk(g) if isinstance(n, STMT_TYPES) and n.label > 0]
    stmts.sort(key=lambda n: n.label)
    rows, unreachable = [], []
    for n in stmts:
        mem = an.seen.get(n.label)
        post_mem, post_exc = an.post.get(n.label, BOT_ST)
        if mem is None:
            unreachable.append(n.label)
        line, col = n.span if n.span else (0, 0)
        rows.append({
            "label": n.label, "line": line, "col": col,
            "mem": A.render_mem(mem), "post": A.render_mem(post_mem), "except": A.render_exc(post_exc),
        })
    unc = {"verdict": "impossible" if uncaught is None else "possible",
           "exceptions": A.render_exc(uncaught)}
    verdicts = {
        "divbyzero": _verdict(an.origins["divbyzero"]),
        "memerror": _verdict(an.origins["memerror"]),
        "stack_overflow": _verdict(an.origins["stkovflw"]),
        "data_overflow": _verdict(an.origins["datovflw"]),
        "uncaught": unc,
        "unreachable": unreachable,
    }
    return Report(rows, verdicts, str(exit_val) if m1 is not None else "⊥",
                  A.render_exc(uncaught), config.echo(), an, rho, mg, err0, (m1, err1), exit_val)
