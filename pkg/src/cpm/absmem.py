"""Abstract memory structures.

An abstract memory mirrors the concrete layout:

* ``data`` maps typed data cells ``(Loc, SType)`` to abstract values, each
  flagged *definite* (present in every described memory) or not;
* ``frames`` lists the activation frames bottom first.  A frame is a sequence
  of slots, each a block marker or a typed stack cell, so indirect locators
  resolve exactly as they do concretely.

Two summary flags keep joins of differently shaped memories sound: an
``open`` frame may continue with arbitrary slots after its known prefix, and
a ``deep`` memory may have arbitrary frames below the listed ones.

The bottom memory is ``None``; every operation is strict.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from . import memory as M
from .domains import (
    AbsBool, AbsExc, AbsVal, BOOL_TOP, EXC_BOT, EXC_TOP, FF, INF, INT_BOT, INT_TOP, Interval,
    NEG_INF, RTS_BOT, TT, VAL_BOT,
)
from .syntax import (
    And, AnyPattern, Arith, Binder, BoolConst, Cell, Cmp, IntConst, Loc, Neg, Not, Or,
    RtsPattern, SType, TypePattern, Var,
)

MARK = M.MARK

_TOP_OF = {SType.INTEGER: INT_TOP, SType.BOOLEAN: BOOL_TOP}


def top_of(stype: SType):
    return _TOP_OF[SType(stype)]


def _vjoin(a, b):
    return a.join(b)


def _vwiden(a, b):
    return a.widen(b)


@dataclass(frozen=True)
class Slot:
    """A stack cell in an abstract frame."""

    stype: SType
    value: object  # Interval or AbsBool

    def __str__(self) -> str:
        return f"{self.stype}:{self.value}"


@dataclass(frozen=True)
class Frame:
    slots: tuple = ()
    open: bool = False

    def __str__(self) -> str:
        body = " ".join(s if isinstance(s, str) else str(s) for s in self.slots)
        return f"[{body}{' …' if self.open else ''}]"


@dataclass(frozen=True)
class DataCell:
    value: object
    definite: bool = True


@dataclass(frozen=True)
class AbsMem:
    data: Mapping = field(default_factory=dict)
    frames: tuple = (Frame(),)
    deep: bool = False
    next_data: int = 0
    data_capacity: int = field(default=M.DEFAULT_DATA_CAPACITY, compare=False)
    stack_capacity: int = field(default=M.DEFAULT_STACK_CAPACITY, compare=False)

    @property
    def top(self) -> Frame:
        return self.frames[-1]

    def with_top(self, frame: Frame) -> "AbsMem":
        return replace(self, frames=self.frames[:-1] + (frame,))

    @property
    def exact_shape(self) -> bool:
        return not self.deep and not any(f.open for f in self.frames)

    def stack_length(self) -> int:
        """Length of the concrete stack word (a lower bound unless ``exact_shape``)."""
        return sum(len(f.slots) for f in self.frames) + len(self.frames) - 1

    def render(self) -> str:
        cells = []
        for (loc, st), c in sorted(self.data.items(), key=lambda kv: (kv[0][0].index, kv[0][1].value)):
            cells.append(f"{loc}:{st}={c.value}{'' if c.definite else '?'}")
        frames = " ‡ ".join(str(f) for f in self.frames)
        return "{" + ", ".join(cells) + "} " + ("… ‡ " if self.deep else "") + frames

    def __str__(self) -> str:
        return self.render()


def render_mem(m: Optional[AbsMem]) -> str:
    return "⊥" if m is None else m.render()


def initial_abs_memory(data_capacity: int = M.DEFAULT_DATA_CAPACITY,
                       stack_capacity: int = M.DEFAULT_STACK_CAPACITY) -> AbsMem:
    return AbsMem({}, (Frame(),), False, 0, data_capacity, stack_capacity)


# ---------------------------------------------------------------- abstract states


@dataclass(frozen=True)
class AValState:
    val: AbsVal
    mem: AbsMem


@dataclass(frozen=True)
class AExcState:
    mem: AbsMem
    exc: AbsExc

    def __str__(self) -> str:
        return f"⟨{self.mem.render()}, {self.exc}⟩"


def vstate(val: AbsVal, mem: Optional[AbsMem]) -> Optional[AValState]:
    """Smash pairing: bottom if either side is bottom."""
    if mem is None or val.is_bottom:
        return None
    return AValState(val, mem)


def estate(mem: Optional[AbsMem], exc: AbsExc) -> Optional[AExcState]:
    if mem is None or exc.is_bottom:
        return None
    return AExcState(mem, exc)


def render_exc(e: Optional[AExcState]) -> str:
    return "none" if e is None else str(e.exc)


# ---------------------------------------------------------------- lattice


def _combine_frames(a: Frame, b: Frame, vop) -> Frame:
    out = []
    n = min(len(a.slots), len(b.slots))
    for i in range(n):
        sa, sb = a.slots[i], b.slots[i]
        if isinstance(sa, str) and isinstance(sb, str):
            out.append(sa)
        elif isinstance(sa, Slot) and isinstance(sb, Slot) and sa.stype == sb.stype:
            out.append(Slot(sa.stype, vop(sa.value, sb.value)))
        else:
            break
    k = len(out)
    return Frame(tuple(out), a.open or b.open or k < len(a.slots) or k < len(b.slots))


def _combine(x: Optional[AbsMem], y: Optional[AbsMem], vop) -> Optional[AbsMem]:
    if x is None:
        return y
    if y is None:
        return x
    data = {}
    for key in x.data.keys() | y.data.keys():
        cx, cy = x.data.get(key), y.data.get(key)
        if cx is not None and cy is not None:
            data[key] = DataCell(vop(cx.value, cy.value), cx.definite and cy.definite)
        else:
            data[key] = DataCell((cx or cy).value, False)
    k = min(len(x.frames), len(y.frames))
    frames = tuple(_combine_frames(a, b, vop) for a, b in zip(x.frames[-k:], y.frames[-k:]))
    deep = x.deep or y.deep or len(x.frames) != len(y.frames)
    return AbsMem(data, frames, deep, max(x.next_data, y.next_data), x.data_capacity, x.stack_capacity)


def join_mem(x, y):
    return _combine(x, y, _vjoin)


def widen_mem(x, y):
    """Shape-align, then widen values pointwise."""
    return _combine(x, y, _vwiden)


def _frame_leq(a: Frame, b: Frame) -> bool:
    if b.open:
        if len(a.slots) < len(b.slots):
            return False
    elif a.open or len(a.slots) != len(b.slots):
        return False
    for sa, sb in zip(a.slots, b.slots):
        if isinstance(sb, str):
            if sa != sb:
                return False
        elif not (isinstance(sa, Slot) and sa.stype == sb.stype and sa.value.leq(sb.value)):
            return False
    return True


def leq_mem(x: Optional[AbsMem], y: Optional[AbsMem]) -> bool:
    if x is None:
        return True
    if y is None:
        return False
    for key, cx in x.data.items():
        cy = y.data.get(key)
        if cy is None or not cx.value.leq(cy.value) or (cy.definite and not cx.definite):
            return False
    for key, cy in y.data.items():
        if cy.definite and key not in x.data:
            return False
    if y.deep:
        if len(x.frames) < len(y.frames):
            return False
    elif x.deep or len(x.frames) != len(y.frames):
        return False
    k = len(y.frames)
    return all(_frame_leq(a, b) for a, b in zip(x.frames[-k:], y.frames))


def join_vstate(a: Optional[AValState], b: Optional[AValState]):
    if a is None:
        return b
    if b is None:
        return a
    return AValState(a.val.join(b.val), join_mem(a.mem, b.mem))


def join_estate(a: Optional[AExcState], b: Optional[AExcState]):
    if a is None:
        return b
    if b is None:
        return a
    return AExcState(join_mem(a.mem, b.mem), a.exc.join(b.exc))


def widen_estate(a: Optional[AExcState], b: Optional[AExcState]):
    if a is None:
        return b
    if b is None:
        return a
    return AExcState(widen_mem(a.mem, b.mem), a.exc.widen(b.exc))


def leq_estate(a: Optional[AExcState], b: Optional[AExcState]) -> bool:
    if a is None:
        return True
    if b is None:
        return False
    return leq_mem(a.mem, b.mem) and a.exc.leq(b.exc)


def join_all_estates(*states):
    out = None
    for s in states:
        out = join_estate(out, s)
    return out


# ---------------------------------------------------------------- abstraction of concrete memories


def alpha_mem(mem: M.Mem) -> AbsMem:
    """Cellwise singleton abstraction of a concrete memory."""
    data = {}
    for (loc, st), v in mem.cells.items():
        if loc.segment == "data":
            data[(loc, st)] = DataCell(AbsVal.alpha(v).part(st), True)
    frames = []
    for fr in M.frames(mem.stack):
        slots, is_open = [], False
        for s in fr:
            if s == MARK:
                slots.append(MARK)
                continue
            found = [(st, mem.cells[(s, st)]) for st in SType if (s, st) in mem.cells]
            if len(found) != 1:
                is_open = True
                break
            st, v = found[0]
            slots.append(Slot(st, AbsVal.alpha(v).part(st)))
        frames.append(Frame(tuple(slots), is_open))
    return AbsMem(data, tuple(frames), False, mem.next_data, mem.data_capacity, mem.stack_capacity)


def alpha_estate(state: M.ExcState) -> AExcState:
    return AExcState(alpha_mem(state.mem), AbsExc.alpha(state.exc))


# ---------------------------------------------------------------- read / write

MEMERROR = AbsExc.rts_of("memerror")


def _memerr(mem: AbsMem) -> AExcState:
    return AExcState(mem, MEMERROR)


def a_read(mem: Optional[AbsMem], addr, stype: SType):
    """Abstract read: ``(AValState | None, AExcState | None)``."""
    if mem is None:
        return None, None
    stype = SType(stype)
    top = AbsVal.of_bool(BOOL_TOP) if stype == SType.BOOLEAN else AbsVal.of_int(INT_TOP)
    if isinstance(addr, Loc):
        if addr.segment != "data":
            return vstate(top, mem), _memerr(mem)
        cell = mem.data.get((addr, stype))
        if cell is None:
            return None, _memerr(mem)
        val = AbsVal.of_bool(cell.value) if stype == SType.BOOLEAN else AbsVal.of_int(cell.value)
        return vstate(val, mem), (None if cell.definite else _memerr(mem))
    frame = mem.top
    if addr < len(frame.slots):
        slot = frame.slots[addr]
        if isinstance(slot, Slot) and slot.stype == stype:
            val = AbsVal.of_bool(slot.value) if stype == SType.BOOLEAN else AbsVal.of_int(slot.value)
            return vstate(val, mem), None
        return None, _memerr(mem)
    if frame.open:
        return vstate(top, mem), _memerr(mem)
    return None, _memerr(mem)


def _havoc_slots(frame: Frame) -> Frame:
    return Frame(tuple(s if isinstance(s, str) else Slot(s.stype, top_of(s.stype)) for s in frame.slots), frame.open)


def havoc(mem: Optional[AbsMem]) -> Optional[AbsMem]:
    """Same shape, every cell value set to top."""
    if mem is None:
        return None
    data = {k: DataCell(top_of(k[1]), c.definite) for k, c in mem.data.items()}
    return replace(mem, data=data, frames=tuple(_havoc_slots(f) for f in mem.frames))


def a_write(mem: Optional[AbsMem], target, val: AbsVal):
    """Abstract update: ``(AbsMem | None, AExcState | None)``."""
    if mem is None or val.is_bottom:
        return None, None
    addr, stype = target
    stype = SType(stype)
    part = val.part(stype)
    other = val.ints if stype == SType.BOOLEAN else val.bools
    err = _memerr(mem) if not other.is_bottom else None
    if part.is_bottom:
        return None, err
    if isinstance(addr, Loc):
        if addr.segment != "data":
            return replace(mem, frames=tuple(_havoc_slots(f) for f in mem.frames)), _memerr(mem)
        cell = mem.data.get((addr, stype))
        if cell is None:
            return None, _memerr(mem)
        data = dict(mem.data)
        data[(addr, stype)] = DataCell(part, True)
        return replace(mem, data=data), (err if cell.definite else _memerr(mem))
    frame = mem.top
    if addr < len(frame.slots):
        slot = frame.slots[addr]
        if isinstance(slot, Slot) and slot.stype == stype:
            slots = list(frame.slots)
            slots[addr] = Slot(stype, part)
            return mem.with_top(Frame(tuple(slots), frame.open)), err
        return None, _memerr(mem)
    if frame.open:
        return mem, _memerr(mem)
    return None, _memerr(mem)


def refine_cell(mem: Optional[AbsMem], addr, stype: SType, value) -> Optional[AbsMem]:
    """Meet the cell at ``addr`` with ``value``; bottom if the meet is empty.

    Only used by filters, which describe runs where the cell was read
    successfully, so a possibly-absent cell becomes definite."""
    if mem is None:
        return None
    stype = SType(stype)
    if isinstance(addr, Loc):
        cell = mem.data.get((addr, stype))
        if addr.segment != "data" or cell is None:
            return mem
        v = cell.value.meet(value)
        if v.is_bottom:
            return None
        data = dict(mem.data)
        data[(addr, stype)] = DataCell(v, True)
        return replace(mem, data=data)
    frame = mem.top
    if addr < len(frame.slots):
        slot = frame.slots[addr]
        if isinstance(slot, Slot) and slot.stype == stype:
            v = slot.value.meet(value)
            if v.is_bottom:
                return None
            slots = list(frame.slots)
            slots[addr] = Slot(stype, v)
            return mem.with_top(Frame(tuple(slots), frame.open))
    return mem


# ---------------------------------------------------------------- allocation and frames


def _overflow_split(used_lo: int, used_hi, capacity: int):
    """(may succeed, may overflow)"""
    return used_lo < capacity, used_hi >= capacity


def new_data(mem: Optional[AbsMem], val: AbsVal):
    """new_d: ``((AbsMem, Loc) | None, AExcState | None)``."""
    if mem is None or val.is_bottom:
        return None, None
    locs_all = {k[0] for k in mem.data}
    locs_def = {k[0] for k, c in mem.data.items() if c.definite}
    ok, over = _overflow_split(len(locs_def), len(locs_all), mem.data_capacity)
    err = AExcState(mem, AbsExc.rts_of("datovflw")) if over else None
    if not ok:
        return None, err
    loc = Loc(mem.next_data, "data")
    data = dict(mem.data)
    parts = [(st, val.part(st)) for st in (SType.INTEGER, SType.BOOLEAN) if not val.part(st).is_bottom]
    for st, p in parts:
        data[(loc, st)] = DataCell(p, len(parts) == 1)
    return (replace(mem, data=data, next_data=mem.next_data + 1), loc), err


def new_stack(mem: Optional[AbsMem], val: AbsVal, stype: SType | None = None):
    """new_s: ``((AbsMem, Ind) | None, AExcState | None)``.

    ``stype`` names the cell type (the value's type for well-typed phrases);
    when omitted it is read off the non-bottom part of ``val``."""
    if mem is None or val.is_bottom:
        return None, None
    if stype is None:
        stype = SType.BOOLEAN if val.ints.is_bottom else SType.INTEGER
    stype = SType(stype)
    part = val.part(stype)
    if part.is_bottom:
        return None, None
    used = mem.stack_length()
    ok, over = _overflow_split(used, used if mem.exact_shape else INF, mem.stack_capacity)
    err = AExcState(mem, AbsExc.rts_of("stkovflw")) if over else None
    if not ok:
        return None, err
    frame = mem.top
    index = len(frame.slots)
    if frame.open:
        # the new cell lands somewhere in the unknown tail; reads there are top
        return (mem, index), err
    return (mem.with_top(Frame(frame.slots + (Slot(stype, part),))), index), err


def mark(mem: Optional[AbsMem]) -> Optional[AbsMem]:
    if mem is None:
        return None
    f = mem.top
    if f.open:
        return mem
    return mem.with_top(Frame(f.slots + (MARK,)))


def _last_mark(slots: tuple) -> int:
    for i in range(len(slots) - 1, -1, -1):
        if slots[i] == MARK:
            return i
    return -1


def unmark(mem: Optional[AbsMem]) -> Optional[AbsMem]:
    """Drop the top-most block.  Undefined concretely if the top frame has no
    marker, which gives bottom."""
    if mem is None:
        return None
    f = mem.top
    i = _last_mark(f.slots)
    if f.open:
        return mem.with_top(Frame(f.slots[:i] if i >= 0 else f.slots, True))
    if i < 0:
        return None
    return mem.with_top(Frame(f.slots[:i]))


def link(mem: Optional[AbsMem]) -> Optional[AbsMem]:
    if mem is None:
        return None
    f = mem.top
    i = _last_mark(f.slots)
    if f.open:
        lower = Frame(f.slots[:i] if i >= 0 else f.slots, True)
        return replace(mem, frames=mem.frames[:-1] + (lower, Frame((), True)))
    if i < 0:
        return None
    return replace(mem, frames=mem.frames[:-1] + (Frame(f.slots[:i]), Frame(f.slots[i + 1:])))


def unlink(mem: Optional[AbsMem], restore: Optional[AbsMem] = None) -> Optional[AbsMem]:
    """Merge the top frame into the one below.

    When ``restore`` (the memory right after ``link`` at the call site) is
    given, the frames below the callee's come from it: a callee can only touch
    its own frame and data cells, so the caller's frames are unchanged."""
    if mem is None:
        return None
    if restore is not None and len(restore.frames) >= 2:
        mem = replace(mem, frames=restore.frames[:-1] + (mem.top,), deep=restore.deep)
    if len(mem.frames) < 2:
        if not mem.deep:
            return None
        return replace(mem, frames=(Frame((), True),))
    lower, upper = mem.frames[-2], mem.frames[-1]
    if lower.open:
        merged = lower
    else:
        merged = Frame(lower.slots + (MARK,) + upper.slots, upper.open)
    return replace(mem, frames=mem.frames[:-2] + (merged,))


def cleanup_data(state: Optional[AExcState]) -> Optional[AExcState]:
    if state is None:
        return None
    m = state.mem
    return AExcState(AbsMem({}, (Frame(),), False, m.next_data, m.data_capacity, m.stack_capacity), state.exc)


def lift_exc(op, state: Optional[AExcState]) -> Optional[AExcState]:
    if state is None:
        return None
    return estate(op(state.mem), state.exc)


# ---------------------------------------------------------------- selectors and exception filters


def mem_of(state: Optional[AExcState]) -> Optional[AbsMem]:
    return None if state is None else state.mem


def sel(ctype: str, state: Optional[AExcState]):
    """The RTS, integer or Boolean part of an abstract exception state."""
    exc = EXC_BOT if state is None else state.exc
    if ctype == "rts_exception":
        return exc.rts
    if ctype == "integer":
        return exc.val.ints
    return exc.val.bools


def filter_exception(p, state: Optional[AExcState]):
    """(phi+, phi-): the parts of ``state`` a clause with pattern ``p`` does and
    does not catch."""
    if state is None:
        return None, None
    mem, exc = state.mem, state.exc
    if isinstance(p, AnyPattern):
        return state, None
    if isinstance(p, RtsPattern):
        caught = AbsExc(exc.rts.meet(AbsExc.rts_of(p.name).rts), VAL_BOT)
        rest = AbsExc(exc.rts.minus(p.name), exc.val)
        return estate(mem, caught), estate(mem, rest)
    ctype = p.ctype if isinstance(p, TypePattern) else SType(p.stype).value
    if ctype == "rts_exception":
        return estate(mem, AbsExc(exc.rts, VAL_BOT)), estate(mem, AbsExc(RTS_BOT, exc.val))
    if ctype == "integer":
        return (estate(mem, AbsExc(RTS_BOT, AbsVal.of_int(exc.val.ints))),
                estate(mem, AbsExc(exc.rts, AbsVal.of_bool(exc.val.bools))))
    return (estate(mem, AbsExc(RTS_BOT, AbsVal.of_bool(exc.val.bools))),
            estate(mem, AbsExc(exc.rts, AbsVal.of_int(exc.val.ints))))


# ---------------------------------------------------------------- guard filter

_NEGATE = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "<>", "<>": "="}
_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "<>": "<>"}


def _value(env, mem: Optional[AbsMem], e) -> AbsVal:
    """Abstract value of a pure expression, ignoring its exceptional outcomes."""
    if mem is None:
        return VAL_BOT
    if isinstance(e, IntConst):
        return AbsVal.of_int(Interval.const(e.value))
    if isinstance(e, BoolConst):
        return AbsVal.of_bool(TT if e.value else FF)
    if isinstance(e, Var):
        c = env[e.name]
        v, _ = a_read(mem, c.addr, c.stype)
        return VAL_BOT if v is None else v.val
    if isinstance(e, Neg):
        return AbsVal.of_int(_value(env, mem, e.operand).ints.neg())
    if isinstance(e, Arith):
        a, b = _value(env, mem, e.left).ints, _value(env, mem, e.right).ints
        if a.is_bottom or b.is_bottom:
            return VAL_BOT
        return AbsVal.of_int({"+": a.add, "-": a.sub, "*": a.mul, "/": a.div, "%": a.mod}[e.op](b))
    if isinstance(e, Cmp):
        a, b = _value(env, mem, e.left).ints, _value(env, mem, e.right).ints
        return AbsVal.of_bool(a.cmp(e.op, b))
    if isinstance(e, Not):
        return AbsVal.of_bool(_value(env, mem, e.operand).bools.neg())
    if isinstance(e, (And, Or)):
        short = not isinstance(e, And)  # value that stops evaluation early
        a = _value(env, mem, e.left).bools
        out = AbsBool(frozenset({short})) if a.may_be(short) else AbsBool()
        if a.may_be(not short):
            rest = filter_guard(env, mem, e.left, not short)
            out = out.join(_value(env, rest, e.right).bools)
        return AbsVal.of_bool(out)
    raise TypeError(f"not an expression: {e!r}")


def _refine_interval(x: Interval, op: str, y: Interval) -> Interval:
    """Values of x that can satisfy ``x op v`` for some v in y."""
    if op == "<":
        return x.meet(Interval(NEG_INF, y.hi - 1))
    if op == "<=":
        return x.meet(Interval(NEG_INF, y.hi))
    if op == ">":
        return x.meet(Interval(y.lo + 1, INF))
    if op == ">=":
        return x.meet(Interval(y.lo, INF))
    if op == "=":
        return x.meet(y)
    if y.is_singleton and not x.is_bottom:
        lo = x.lo + 1 if x.lo == y.lo else x.lo
        hi = x.hi - 1 if x.hi == y.lo else x.hi
        return Interval.of(lo, hi)
    return x


def filter_guard(env, mem: Optional[AbsMem], e, positive: bool = True) -> Optional[AbsMem]:
    """phi: an over-approximation of the memories in which ``e`` evaluates to
    ``positive`` (tt by default)."""
    if mem is None:
        return None
    if isinstance(e, BoolConst):
        return mem if e.value == positive else None
    if isinstance(e, Var):
        c = env[e.name]
        return refine_cell(mem, c.addr, c.stype, AbsBool(frozenset({positive})))
    if isinstance(e, Not):
        return filter_guard(env, mem, e.operand, not positive)
    if isinstance(e, (And, Or)):
        short = not isinstance(e, And)
        if positive == short:
            # result is `short` when the left side is, or the left side is not and the right is
            early = filter_guard(env, mem, e.left, short)
            late = filter_guard(env, filter_guard(env, mem, e.left, not short), e.right, short)
            return join_mem(early, late)
        return filter_guard(env, filter_guard(env, mem, e.left, not short), e.right, not short)
    if isinstance(e, Cmp):
        op = e.op if positive else _NEGATE[e.op]
        a, b = _value(env, mem, e.left).ints, _value(env, mem, e.right).ints
        if a.is_bottom or b.is_bottom:
            return None
        out = mem
        if isinstance(e.left, Var):
            c = env[e.left.name]
            a2 = _refine_interval(a, op, b)
            if a2.is_bottom:
                return None
            out = refine_cell(out, c.addr, c.stype, a2)
            a = a2
        if isinstance(e.right, Var):
            c = env[e.right.name]
            b2 = _refine_interval(b, _FLIP[op], a)
            if b2.is_bottom:
                return None
            out = refine_cell(out, c.addr, c.stype, b2)
        if out is None:
            return None
        if not _value(env, out, e).bools.may_be(positive):
            return None
        return out
    if not _value(env, mem, e).bools.may_be(positive):
        return None
    return mem
