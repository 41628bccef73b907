"""Hypothesis strategies for abstract values and memories."""

from __future__ import annotations

from hypothesis import strategies as st

from cpm.absmem import AbsMem, DataCell, Frame, Slot
from cpm.domains import (
    AbsBool, AbsExc, AbsVal, INF, INT_BOT, NEG_INF, Interval, RtsSet,
)
from cpm.memory import MARK
from cpm.syntax import Loc, RTS_NAMES, SType

small = st.integers(-12, 12)
bound_lo = st.one_of(small, st.just(NEG_INF))
bound_hi = st.one_of(small, st.just(INF))


@st.composite
def intervals(draw, allow_bottom=True):
    if allow_bottom and draw(st.integers(0, 9)) == 0:
        return INT_BOT
    lo, hi = draw(bound_lo), draw(bound_hi)
    if lo > hi:
        lo, hi = hi, lo
        lo = NEG_INF if lo == INF else lo
        hi = INF if hi == NEG_INF else hi
    return Interval(lo, hi)


def members(i: Interval):
    """A strategy over integers in gamma(i) (i non-bottom)."""
    lo = -10 ** 6 if i.lo == NEG_INF else i.lo
    hi = 10 ** 6 if i.hi == INF else i.hi
    return st.integers(lo, hi)


bools = st.sets(st.booleans()).map(lambda s: AbsBool(frozenset(s)))
rts_sets = st.builds(RtsSet, st.frozensets(st.sampled_from(sorted(RTS_NAMES | {"externcall"}))), st.booleans())
absvals = st.builds(AbsVal, intervals(), bools)
absexcs = st.builds(AbsExc, rts_sets, absvals)
values = st.one_of(st.integers(-20, 20), st.booleans())


def _typed(stype):
    return intervals(allow_bottom=False) if stype == SType.INTEGER else bools.filter(lambda b: not b.is_bottom)


@st.composite
def slots(draw):
    if draw(st.integers(0, 5)) == 0:
        return MARK
    stype = draw(st.sampled_from([SType.INTEGER, SType.BOOLEAN]))
    return Slot(stype, draw(_typed(stype)))


@st.composite
def abs_mems(draw):
    """Small abstract memories over a shared pool of locations, so that
    pairs of them overlap and joins are interesting."""
    data = {}
    for i in draw(st.sets(st.integers(0, 3), max_size=3)):
        stype = SType.INTEGER if i % 2 == 0 else SType.BOOLEAN
        data[(Loc(i, "data"), stype)] = DataCell(draw(_typed(stype)), draw(st.booleans()))
    frames = tuple(Frame(tuple(draw(st.lists(slots(), max_size=3))), draw(st.booleans()))
                   for _ in range(draw(st.integers(1, 3))))
    return AbsMem(data, frames, draw(st.booleans()), 4)


maybe_mems = st.one_of(st.none(), abs_mems())
