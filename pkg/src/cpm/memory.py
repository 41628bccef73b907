"""Concrete memory structures: a cell map plus a stack word with markers.

The stack word holds locations and two kinds of marker: ``MARK`` (a block
boundary) and ``FRAME`` (an activation boundary).  Indirect locators index the
top-most frame, i.e. the suffix after the last ``FRAME``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Union

from .syntax import Addr, Loc, SType, type_of

MARK = "†"
FRAME = "‡"

DEFAULT_DATA_CAPACITY = 2 ** 20
DEFAULT_STACK_CAPACITY = 2 ** 16


class FrameError(AssertionError):
    """A frame operation was applied outside its domain (never reachable from valid programs)."""


@dataclass(frozen=True)
class Rts:
    """A run-time support exception."""

    name: str

    def __str__(self) -> str:
        return self.name


Except = Union[Rts, int, bool]


def show_value(v) -> str:
    if isinstance(v, bool):
        return "tt" if v else "ff"
    return str(v)


@dataclass(frozen=True)
class Mem:
    cells: Mapping = field(default_factory=dict)  # (Loc, SType) -> int | bool, never mutated
    stack: tuple = ()
    data_capacity: int = field(default=DEFAULT_DATA_CAPACITY, compare=False)
    stack_capacity: int = field(default=DEFAULT_STACK_CAPACITY, compare=False)
    next_data: int = field(default=0, compare=False)
    next_stack: int = field(default=0, compare=False)
    data_used: int = field(default=0, compare=False)

    def _replace(self, **kw) -> "Mem":
        d = dict(
            cells=self.cells, stack=self.stack, data_capacity=self.data_capacity,
            stack_capacity=self.stack_capacity, next_data=self.next_data,
            next_stack=self.next_stack, data_used=self.data_used,
        )
        d.update(kw)
        return Mem(**d)

    def to_json(self) -> dict:
        return {
            "cells": [
                {"loc": str(loc), "type": str(st), "value": show_value(v)}
                for (loc, st), v in sorted(self.cells.items(), key=lambda kv: (kv[0][0].segment, kv[0][0].index, kv[0][1].value))
            ],
            "stack": [s if isinstance(s, str) else str(s) for s in self.stack],
        }

    def digest(self) -> str:
        text = json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha1(text.encode()).hexdigest()[:12]


def initial_memory(data_capacity: int = DEFAULT_DATA_CAPACITY,
                   stack_capacity: int = DEFAULT_STACK_CAPACITY) -> Mem:
    return Mem({}, (), data_capacity, stack_capacity)


@dataclass(frozen=True)
class ExcState:
    mem: Mem
    exc: Except

    def __str__(self) -> str:
        return f"exception {show_value(self.exc) if not isinstance(self.exc, Rts) else self.exc}"


def top_frame(stack: tuple) -> tuple:
    """tf(w): the suffix after the last frame marker."""
    for i in range(len(stack) - 1, -1, -1):
        if stack[i] == FRAME:
            return stack[i + 1:]
    return stack


def frames(stack: tuple) -> list:
    """Split a stack word at frame markers, bottom first."""
    out, cur = [], []
    for s in stack:
        if s == FRAME:
            out.append(tuple(cur))
            cur = []
        else:
            cur.append(s)
    out.append(tuple(cur))
    return out


def resolve(mem: Mem, addr: Addr):
    """The location an address denotes, or ``None`` if undefined."""
    if isinstance(addr, Loc):
        return addr
    tf = top_frame(mem.stack)
    if 0 <= addr < len(tf) and isinstance(tf[addr], Loc):
        return tf[addr]
    return None


def read(mem: Mem, addr: Addr, stype: SType):
    """``(value, mem)`` on success, else an ``ExcState`` carrying memerror."""
    loc = resolve(mem, addr)
    if loc is not None and (loc, stype) in mem.cells:
        return mem.cells[(loc, stype)], mem
    return ExcState(mem, Rts("memerror"))


def write(mem: Mem, target: tuple, value):
    """Update the cell ``target = (addr, stype)``; ``Mem`` or memerror ``ExcState``."""
    addr, stype = target
    loc = resolve(mem, addr)
    if loc is None or (loc, stype) not in mem.cells or type_of(value) != stype:
        return ExcState(mem, Rts("memerror"))
    return mem._replace(cells={**mem.cells, (loc, stype): value})


def new_data(mem: Mem, value):
    """new_d: ``(mem', Loc)`` or datovflw."""
    if mem.data_used >= mem.data_capacity:
        return ExcState(mem, Rts("datovflw"))
    loc = Loc(mem.next_data, "data")
    cells = {**mem.cells, (loc, type_of(value)): value}
    return mem._replace(cells=cells, next_data=mem.next_data + 1, data_used=mem.data_used + 1), loc


def new_stack(mem: Mem, value):
    """new_s: ``(mem', Ind)`` or stkovflw.  Markers count toward the capacity."""
    if len(mem.stack) >= mem.stack_capacity:
        return ExcState(mem, Rts("stkovflw"))
    loc = Loc(mem.next_stack, "stack")
    index = len(top_frame(mem.stack))
    cells = {**mem.cells, (loc, type_of(value)): value}
    return mem._replace(cells=cells, stack=mem.stack + (loc,), next_stack=mem.next_stack + 1), index


def alloc(kind: str, value, mem: Mem):
    return new_data(mem, value) if kind == "data" else new_stack(mem, value)


def cleanup_data(state: ExcState) -> ExcState:
    """cleanup_d: the empty memory, keeping the exception."""
    m = state.mem
    return ExcState(m._replace(cells={}, stack=(), data_used=0), state.exc)


def mark(mem: Mem) -> Mem:
    return mem._replace(stack=mem.stack + (MARK,))


def _last(stack: tuple, marker: str) -> int:
    for i in range(len(stack) - 1, -1, -1):
        if stack[i] == marker:
            return i
        if stack[i] in (MARK, FRAME):
            break
    raise FrameError(f"no {marker} in the top-most segment of {stack!r}")


def unmark(mem: Mem) -> Mem:
    i = _last(mem.stack, MARK)
    cells = dict(mem.cells)
    for loc in mem.stack[i + 1:]:
        for st in SType:
            cells.pop((loc, st), None)
    return mem._replace(cells=cells, stack=mem.stack[:i])


def link(mem: Mem) -> Mem:
    i = _last(mem.stack, MARK)
    return mem._replace(stack=mem.stack[:i] + (FRAME,) + mem.stack[i + 1:])


def unlink(mem: Mem) -> Mem:
    i = _last(mem.stack, FRAME)
    return mem._replace(stack=mem.stack[:i] + (MARK,) + mem.stack[i + 1:])


def lift(op, state):
    """Apply a frame operation to a memory or to the memory of an exception state."""
    if isinstance(state, ExcState):
        return ExcState(op(state.mem), state.exc)
    return op(state)


def frame_op(op: str, mem: Mem):
    """Named access to mark/unmark/link/unlink; ``None`` when undefined."""
    fn = {"mark": mark, "unmark": unmark, "link": link, "unlink": unlink}[op]
    try:
        return fn(mem)
    except FrameError:
        return None
