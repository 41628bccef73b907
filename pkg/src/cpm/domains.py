"""Abstract domains: intervals, the four-point Booleans, RTS exception sets,
and the storable-value and exception products built from them.

Every operator is strict: a bottom argument gives a bottom result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .interp import arith, int_div

INF = float("inf")
NEG_INF = -INF


def _is_inf(x) -> bool:
    return isinstance(x, float)


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _add(a, b):
    if _is_inf(a):
        return a
    if _is_inf(b):
        return b
    return a + b


def _mul(a, b):
    if a == 0 or b == 0:
        return 0
    if _is_inf(a) or _is_inf(b):
        return INF if _sign(a) == _sign(b) else NEG_INF
    return a * b


def _div(a, b):
    """Truncating quotient of two bounds; ``b`` is never zero."""
    if _is_inf(b):
        return 0
    if _is_inf(a):
        return INF if _sign(a) == _sign(b) else NEG_INF
    return int_div(a, b)


def _show_bound(x) -> str:
    if _is_inf(x):
        return "+inf" if x > 0 else "-inf"
    return str(x)


# ---------------------------------------------------------------- Bool#


@dataclass(frozen=True)
class AbsBool:
    """A subset of {tt, ff}: the four-point lattice."""

    values: frozenset = frozenset()

    @property
    def is_bottom(self) -> bool:
        return not self.values

    def leq(self, other: "AbsBool") -> bool:
        return self.values <= other.values

    def join(self, other: "AbsBool") -> "AbsBool":
        return AbsBool(self.values | other.values)

    def meet(self, other: "AbsBool") -> "AbsBool":
        return AbsBool(self.values & other.values)

    widen = join  # finite height

    def contains(self, v) -> bool:
        return isinstance(v, bool) and v in self.values

    def may_be(self, v: bool) -> bool:
        return v in self.values

    def neg(self) -> "AbsBool":
        return AbsBool(frozenset(not v for v in self.values))

    def _lift(self, other, fn) -> "AbsBool":
        return AbsBool(frozenset(fn(a, b) for a in self.values for b in other.values))

    def and_(self, other: "AbsBool") -> "AbsBool":
        return self._lift(other, lambda a, b: a and b)

    def or_(self, other: "AbsBool") -> "AbsBool":
        return self._lift(other, lambda a, b: a or b)

    def __str__(self) -> str:
        if not self.values:
            return "⊥"
        if len(self.values) == 2:
            return "⊤"
        return "{tt}" if True in self.values else "{ff}"

    @staticmethod
    def alpha(values: Iterable) -> "AbsBool":
        return AbsBool(frozenset(bool(v) for v in values))


BOOL_BOT = AbsBool(frozenset())
FF = AbsBool(frozenset({False}))
TT = AbsBool(frozenset({True}))
BOOL_TOP = AbsBool(frozenset({False, True}))


# ---------------------------------------------------------------- Int#


@dataclass(frozen=True)
class Interval:
    """``[lo, hi]`` over the integers; bounds may be -inf/+inf.  Empty iff lo > hi."""

    lo: object
    hi: object

    @staticmethod
    def of(lo, hi) -> "Interval":
        return INT_BOT if lo > hi else Interval(lo, hi)

    @staticmethod
    def const(m: int) -> "Interval":
        return Interval(m, m)

    @staticmethod
    def alpha(values: Iterable) -> "Interval":
        vs = list(values)
        return Interval(min(vs), max(vs)) if vs else INT_BOT

    @property
    def is_bottom(self) -> bool:
        return self.lo > self.hi

    @property
    def is_singleton(self) -> bool:
        return not self.is_bottom and self.lo == self.hi

    def contains(self, v) -> bool:
        return (not isinstance(v, bool) and isinstance(v, int)
                and not self.is_bottom and self.lo <= v <= self.hi)

    def leq(self, other: "Interval") -> bool:
        if self.is_bottom:
            return True
        if other.is_bottom:
            return False
        return other.lo <= self.lo and self.hi <= other.hi

    def join(self, other: "Interval") -> "Interval":
        if self.is_bottom:
            return other
        if other.is_bottom:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def meet(self, other: "Interval") -> "Interval":
        if self.is_bottom or other.is_bottom:
            return INT_BOT
        return Interval.of(max(self.lo, other.lo), min(self.hi, other.hi))

    def widen(self, other: "Interval") -> "Interval":
        if self.is_bottom:
            return other
        if other.is_bottom:
            return self
        lo = self.lo if other.lo >= self.lo else NEG_INF
        hi = self.hi if other.hi <= self.hi else INF
        return Interval(lo, hi)

    # -- arithmetic
    def neg(self) -> "Interval":
        if self.is_bottom:
            return INT_BOT
        return Interval(-self.hi, -self.lo)

    def add(self, other: "Interval") -> "Interval":
        if self.is_bottom or other.is_bottom:
            return INT_BOT
        return Interval(_add(self.lo, other.lo), _add(self.hi, other.hi))

    def sub(self, other: "Interval") -> "Interval":
        return self.add(other.neg())

    def mul(self, other: "Interval") -> "Interval":
        if self.is_bottom or other.is_bottom:
            return INT_BOT
        cs = [_mul(a, b) for a in (self.lo, self.hi) for b in (other.lo, other.hi)]
        return Interval(min(cs), max(cs))

    def nonzero_parts(self) -> list:
        """The divisor split at zero: the negative and positive sub-intervals."""
        parts = []
        if self.is_bottom:
            return parts
        if self.lo <= -1:
            parts.append(Interval(self.lo, min(self.hi, -1)))
        if self.hi >= 1:
            parts.append(Interval(max(self.lo, 1), self.hi))
        return parts

    def div(self, other: "Interval") -> "Interval":
        if self.is_bottom:
            return INT_BOT
        out = INT_BOT
        for part in other.nonzero_parts():
            # on a sign-constant divisor, truncating division is monotone in
            # each argument, so the extremes sit at the corners
            cs = [_div(a, b) for a in (self.lo, self.hi) for b in (part.lo, part.hi)]
            out = out.join(Interval(min(cs), max(cs)))
        return out

    def mod(self, other: "Interval") -> "Interval":
        if self.is_bottom:
            return INT_BOT
        parts = other.nonzero_parts()
        if not parts:
            return INT_BOT
        if self.is_singleton and other.is_singleton and not (_is_inf(self.lo) or _is_inf(other.lo)):
            r = arith("%", self.lo, other.lo)
            return Interval(r, r)
        max_abs = max(max(abs(p.lo), abs(p.hi)) for p in parts)
        min_abs = min(min(abs(p.lo), abs(p.hi)) for p in parts)
        x_abs = max(abs(self.lo), abs(self.hi))
        if x_abs < min_abs:
            return self  # |x| below every divisor: x mod y = x
        bound = max_abs - 1 if not _is_inf(max_abs) else INF
        lo = 0 if self.lo >= 0 else max(self.lo, -bound)
        hi = 0 if self.hi <= 0 else min(self.hi, bound)
        return Interval(lo, hi)

    # -- comparisons
    def cmp(self, op: str, other: "Interval") -> AbsBool:
        if self.is_bottom or other.is_bottom:
            return BOOL_BOT
        a, b = self, other
        if op == "<":
            return TT if a.hi < b.lo else FF if a.lo >= b.hi else BOOL_TOP
        if op == "<=":
            return TT if a.hi <= b.lo else FF if a.lo > b.hi else BOOL_TOP
        if op == ">":
            return b.cmp("<", a)
        if op == ">=":
            return b.cmp("<=", a)
        if op == "=":
            if a.is_singleton and b.is_singleton and a.lo == b.lo:
                return TT
            return FF if a.meet(b).is_bottom else BOOL_TOP
        if op == "<>":
            return a.cmp("=", b).neg()
        raise ValueError(op)

    def __str__(self) -> str:
        if self.is_bottom:
            return "⊥"
        return f"[{_show_bound(self.lo)},{_show_bound(self.hi)}]"


INT_BOT = Interval(INF, NEG_INF)
INT_TOP = Interval(NEG_INF, INF)


def concrete_int_op(op: str, x: int, y: int):
    """The concrete operation the abstract ones must cover (``None`` if undefined)."""
    if op in ("/", "%") and y == 0:
        return None
    return arith(op, x, y)


def int_arith(op: str, a: Interval, b: Interval | None = None) -> Interval:
    if op == "neg":
        return a.neg()
    return {"+": a.add, "-": a.sub, "*": a.mul, "/": a.div, "%": a.mod}[op](b)


def int_cmp(op: str, a: Interval, b: Interval) -> AbsBool:
    return a.cmp(op, b)


# ---------------------------------------------------------------- Rts#


@dataclass(frozen=True)
class RtsSet:
    """A set of RTS exception names, finite or cofinite (``cofinite`` means
    every name except those in ``names``)."""

    names: frozenset = frozenset()
    cofinite: bool = False

    @staticmethod
    def of(*names) -> "RtsSet":
        return RtsSet(frozenset(names))

    @property
    def is_bottom(self) -> bool:
        return not self.cofinite and not self.names

    @property
    def is_top(self) -> bool:
        return self.cofinite and not self.names

    def contains(self, name: str) -> bool:
        return (name not in self.names) if self.cofinite else (name in self.names)

    def leq(self, other: "RtsSet") -> bool:
        if not self.cofinite:
            return all(other.contains(n) for n in self.names)
        return other.cofinite and other.names <= self.names

    def join(self, other: "RtsSet") -> "RtsSet":
        if not self.cofinite and not other.cofinite:
            return RtsSet(self.names | other.names)
        if self.cofinite and other.cofinite:
            return RtsSet(self.names & other.names, True)
        fin, cof = (self, other) if other.cofinite else (other, self)
        return RtsSet(cof.names - fin.names, True)

    def meet(self, other: "RtsSet") -> "RtsSet":
        if not self.cofinite and not other.cofinite:
            return RtsSet(self.names & other.names)
        if self.cofinite and other.cofinite:
            return RtsSet(self.names | other.names, True)
        fin, cof = (self, other) if other.cofinite else (other, self)
        return RtsSet(fin.names - cof.names)

    def minus(self, name: str) -> "RtsSet":
        if self.cofinite:
            return RtsSet(self.names | {name}, True)
        return RtsSet(self.names - {name})

    widen = join  # names come from finite program text plus the fixed RTS set

    def __str__(self) -> str:
        if self.is_top:
            return "⊤"
        if self.cofinite:
            return "⊤\\{" + ",".join(sorted(self.names)) + "}"
        if not self.names:
            return "⊥"
        return "{" + ",".join(sorted(self.names)) + "}"


RTS_BOT = RtsSet()
RTS_TOP = RtsSet(frozenset(), True)


# ---------------------------------------------------------------- SVal#, Except#


@dataclass(frozen=True)
class AbsVal:
    """Abstract storable value: integer part and Boolean part."""

    ints: Interval = INT_BOT
    bools: AbsBool = BOOL_BOT

    @staticmethod
    def alpha(v) -> "AbsVal":
        if isinstance(v, bool):
            return AbsVal(INT_BOT, AbsBool.alpha([v]))
        return AbsVal(Interval.const(v), BOOL_BOT)

    @staticmethod
    def of_int(i: Interval) -> "AbsVal":
        return AbsVal(i, BOOL_BOT)

    @staticmethod
    def of_bool(b: AbsBool) -> "AbsVal":
        return AbsVal(INT_BOT, b)

    @property
    def is_bottom(self) -> bool:
        return self.ints.is_bottom and self.bools.is_bottom

    def contains(self, v) -> bool:
        return self.bools.contains(v) if isinstance(v, bool) else self.ints.contains(v)

    def leq(self, o: "AbsVal") -> bool:
        return self.ints.leq(o.ints) and self.bools.leq(o.bools)

    def join(self, o: "AbsVal") -> "AbsVal":
        return AbsVal(self.ints.join(o.ints), self.bools.join(o.bools))

    def meet(self, o: "AbsVal") -> "AbsVal":
        return AbsVal(self.ints.meet(o.ints), self.bools.meet(o.bools))

    def widen(self, o: "AbsVal") -> "AbsVal":
        return AbsVal(self.ints.widen(o.ints), self.bools.widen(o.bools))

    def part(self, stype) -> object:
        return self.bools if str(stype) == "boolean" else self.ints

    def __str__(self) -> str:
        if self.is_bottom:
            return "⊥"
        if self.bools.is_bottom:
            return str(self.ints)
        if self.ints.is_bottom:
            return str(self.bools)
        return f"{self.ints}|{self.bools}"


VAL_BOT = AbsVal()
VAL_TOP = AbsVal(INT_TOP, BOOL_TOP)


@dataclass(frozen=True)
class AbsExc:
    """Abstract exception: RTS names plus abstract thrown values."""

    rts: RtsSet = RTS_BOT
    val: AbsVal = VAL_BOT

    @staticmethod
    def alpha(xi) -> "AbsExc":
        from .memory import Rts

        if isinstance(xi, Rts):
            return AbsExc(RtsSet.of(xi.name), VAL_BOT)
        return AbsExc(RTS_BOT, AbsVal.alpha(xi))

    @staticmethod
    def rts_of(*names) -> "AbsExc":
        return AbsExc(RtsSet.of(*names), VAL_BOT)

    @property
    def is_bottom(self) -> bool:
        return self.rts.is_bottom and self.val.is_bottom

    def contains(self, xi) -> bool:
        from .memory import Rts

        if isinstance(xi, Rts):
            return self.rts.contains(xi.name)
        return self.val.contains(xi)

    def leq(self, o: "AbsExc") -> bool:
        return self.rts.leq(o.rts) and self.val.leq(o.val)

    def join(self, o: "AbsExc") -> "AbsExc":
        return AbsExc(self.rts.join(o.rts), self.val.join(o.val))

    def widen(self, o: "AbsExc") -> "AbsExc":
        return AbsExc(self.rts.widen(o.rts), self.val.widen(o.val))

    def __str__(self) -> str:
        if self.is_bottom:
            return "⊥"
        parts = []
        if not self.rts.is_bottom:
            parts.append(str(self.rts))
        if not self.val.ints.is_bottom:
            parts.append(f"integer {self.val.ints}")
        if not self.val.bools.is_bottom:
            parts.append(f"boolean {self.val.bools}")
        return " | ".join(parts)


EXC_BOT = AbsExc()
EXC_TOP = AbsExc(RTS_TOP, VAL_TOP)
