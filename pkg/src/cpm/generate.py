"""Seeded random generation of well-typed CPM programs.

Programs are built as syntax trees, pretty-printed and parsed back, so every
generated program has source text, spans and parser-assigned labels.  Loops
are bounded counters and recursion is guarded by a small constant depth, so
most programs terminate quickly; some still overflow, divide by zero or throw.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .parser import parse
from .printer import pretty
from .syntax import (
    And, AnyPattern, Arith, Assign, Binder, Block, BoolConst, Call, CatchSeq, Clause, Cmp,
    DeclSeq, Function, GlobSeq, GVar, If, IntConst, Let, LVar, Neg, Nil, Nop, Not, Or, Program,
    Rec, RtsPattern, SType, StmtSeq, ThrowExpr, ThrowRts, TryCatch, TryFinally, TypePattern, Var,
    While,
)

I, B = SType.INTEGER, SType.BOOLEAN
RTS = ("divbyzero", "memerror", "stkovflw", "datovflw")


@dataclass(frozen=True)
class _Var:
    name: str
    stype: SType
    assignable: bool = True


@dataclass(frozen=True)
class _Fn:
    name: str
    params: tuple
    result: SType
    recursive: bool = False


@dataclass
class _Gen:
    rng: random.Random
    size: int
    counter: int = 0
    functions: list = field(default_factory=list)

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def chance(self, p: float) -> bool:
        return self.rng.random() < p

    # -- expressions
    def expr(self, scope, stype, depth: int):
        vars_ = [v for v in scope if v.stype == stype]
        if depth <= 0 or self.chance(0.3):
            if vars_ and self.chance(0.6):
                return Var(self.rng.choice(vars_).name)
            return IntConst(self.rng.randint(-5, 9)) if stype == I else BoolConst(self.chance(0.5))
        if stype == I:
            k = self.rng.random()
            if k < 0.1:
                return Neg(self.expr(scope, I, depth - 1))
            op = self.rng.choice("+-*+-/%")
            left = self.expr(scope, I, depth - 1)
            if op in "/%" and self.chance(0.5):
                right = IntConst(self.rng.choice([1, 2, 3, -2, 7]))
            else:
                right = self.expr(scope, I, depth - 1)
            return Arith(op, left, right)
        k = self.rng.random()
        if k < 0.15:
            return Not(self.expr(scope, B, depth - 1))
        if k < 0.45:
            cls = And if self.chance(0.5) else Or
            return cls(self.expr(scope, B, depth - 1), self.expr(scope, B, depth - 1))
        op = self.rng.choice(["=", "<>", "<", "<=", ">=", ">"])
        return Cmp(op, self.expr(scope, I, depth - 1), self.expr(scope, I, depth - 1))

    # -- statements
    def seq(self, items):
        out = items[-1]
        for s in reversed(items[:-1]):
            out = StmtSeq(s, out)
        return out

    def decls(self, items):
        if not items:
            return Nil()
        out = items[-1]
        for d in reversed(items[:-1]):
            out = DeclSeq(d, out)
        return out

    def stmt(self, scope, depth: int, callers=()):
        assignable = [v for v in scope if v.assignable]
        edepth = max(1, min(3, self.size // 3))
        if depth <= 0:
            if assignable and self.chance(0.8):
                v = self.rng.choice(assignable)
                return Assign(v.name, self.expr(scope, v.stype, edepth))
            return Nop()
        k = self.rng.random()
        if k < 0.25 and assignable:
            v = self.rng.choice(assignable)
            return Assign(v.name, self.expr(scope, v.stype, edepth))
        if k < 0.35:
            n = self.rng.randint(2, 3)
            return self.seq([self.stmt(scope, depth - 1, callers) for _ in range(n)])
        if k < 0.45:
            return If(self.expr(scope, B, edepth), self.stmt(scope, depth - 1, callers),
                      self.stmt(scope, depth - 1, callers))
        if k < 0.55:
            return self.loop(scope, depth, callers)
        if k < 0.63:
            return self.block(scope, depth, callers)
        if k < 0.68:
            if self.chance(0.5):
                return ThrowRts(self.rng.choice(RTS))
            return ThrowExpr(self.expr(scope, self.rng.choice([I, B]), edepth))
        if k < 0.80:
            return self.try_catch(scope, depth, callers)
        if k < 0.86:
            return TryFinally(self.stmt(scope, depth - 1, callers), self.stmt(scope, depth - 1, callers))
        call = self.call(scope, callers)
        if call is not None:
            return call
        return Nop()

    def loop(self, scope, depth, callers):
        k = self.fresh("k")
        bound = self.rng.randint(0, 3)
        body = self.stmt(scope, depth - 1, callers)
        step = Assign(k, Arith("+", Var(k), IntConst(1)))
        w = While(Cmp("<", Var(k), IntConst(bound)), StmtSeq(body, step))
        return Block(LVar(k, I, IntConst(0)), w)

    def block(self, scope, depth, callers):
        items, inner = [], list(scope)
        for _ in range(self.rng.randint(1, 2)):
            st = self.rng.choice([I, I, B])
            name = self.fresh("v")
            items.append(LVar(name, st, self.expr(inner, st, 2)))
            inner.append(_Var(name, st))
        return Block(self.decls(items), self.stmt(inner, depth - 1, callers))

    def try_catch(self, scope, depth, callers):
        body = self.stmt(scope, depth - 1, callers)
        clauses = []
        for _ in range(self.rng.randint(1, 2)):
            k = self.rng.random()
            inner = scope
            if k < 0.35:
                p = RtsPattern(self.rng.choice(RTS))
            elif k < 0.55:
                p = TypePattern(self.rng.choice(["rts_exception", "integer", "boolean"]))
            elif k < 0.85:
                st = self.rng.choice([I, B])
                name = self.fresh("e")
                p = Binder(name, st)
                inner = list(scope) + [_Var(name, st)]
            else:
                p = AnyPattern()
            clauses.append(Clause(p, self.stmt(inner, depth - 1, callers)))
        handlers = clauses[-1]
        for c in reversed(clauses[:-1]):
            handlers = CatchSeq(c, handlers)
        return TryCatch(body, handlers)

    def call(self, scope, callers):
        targets = [f for f in self.functions if f.name not in callers]
        if not targets:
            return None
        f = self.rng.choice(targets)
        outs = [v for v in scope if v.assignable and v.stype == f.result]
        if not outs:
            return None
        if f.recursive:
            args = (IntConst(self.rng.randint(0, 2)),)
        else:
            args = tuple(self.expr(scope, st, 2) for _, st in f.params)
        return Call(self.rng.choice(outs).name, f.name, args)

    # -- functions and programs
    def function(self, globals_, callers=()):
        name = self.fresh("f")
        params = tuple((self.fresh("p"), self.rng.choice([I, I, B])) for _ in range(self.rng.randint(0, 2)))
        scope = list(globals_) + [_Var(n, st) for n, st in params]
        items = []
        for _ in range(self.rng.randint(1, 2)):
            st = self.rng.choice([I, B])
            local = self.fresh("v")
            items.append(LVar(local, st, self.expr(scope, st, 2)))
            scope.append(_Var(local, st))
        result = self.rng.choice([I, B])
        body = Let(self.decls(items), self.stmt(scope, max(1, self.size // 4), callers + (name,)),
                   self.expr(scope, result, 2))
        return Function(name, params, body), _Fn(name, params, result)

    def recursive_function(self, globals_):
        """rec f(n) = let acc = e in if n > 0 then (acc := f(n - 1); s) else s' result acc"""
        name, n, acc = self.fresh("r"), self.fresh("n"), self.fresh("a")
        scope = list(globals_) + [_Var(n, I, False), _Var(acc, I)]
        rec_call = Call(acc, name, (Arith("-", Var(n), IntConst(1)),))
        then = StmtSeq(rec_call, self.stmt(scope, 1, (name,)))
        body = Let(LVar(acc, I, self.expr(scope[:-1], I, 2)),
                   If(Cmp(">", Var(n), IntConst(0)), then, self.stmt(scope, 1, (name,))), Var(acc))
        return Rec(Function(name, ((n, I),), body)), _Fn(name, ((n, I),), I, True)

    def program(self):
        globs, globals_ = [], []
        for _ in range(self.rng.randint(0, 2)):
            st = self.rng.choice([I, B])
            name = self.fresh("g")
            globs.append(GVar(name, st, self.expr(globals_, st, 1)))
            globals_.append(_Var(name, st))
        for _ in range(self.rng.randint(0, 2)):
            if self.chance(0.35):
                g, f = self.recursive_function(globals_)
            else:
                g, f = self.function(globals_)
            globs.append(g)
            self.functions.append(f)
        scope = list(globals_)
        items = []
        for _ in range(self.rng.randint(1, 3)):
            st = self.rng.choice([I, I, B])
            name = self.fresh("v")
            items.append(LVar(name, st, self.expr(scope, st, 2)))
            scope.append(_Var(name, st))
        body = Let(self.decls(items), self.stmt(scope, max(1, self.size // 3)), self.expr(scope, I, 2))
        globs.append(Function("main", (), body))
        out = globs[-1]
        for g in reversed(globs[:-1]):
            out = GlobSeq(g, out)
        return out


def generate_ast(seed: int, size: int = 6):
    """A well-typed global declaration (unlabelled nodes)."""
    return _Gen(random.Random(seed), max(1, size)).program()


def generate_source(seed: int, size: int = 6) -> str:
    return pretty(generate_ast(seed, size)) + "\n"


def generate_programs(seed: int, size: int = 6) -> Program:
    """The program for ``(seed, size)``: the same one on every call."""
    return parse(generate_source(seed, size))
