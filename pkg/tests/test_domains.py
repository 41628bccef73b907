"""Intervals, abstract Booleans, RTS sets and their products."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cpm.domains import (
    AbsBool, AbsExc, AbsVal, BOOL_BOT, BOOL_TOP, FF, INF, INT_BOT, INT_TOP, NEG_INF, RTS_BOT,
    RTS_TOP, TT, Interval, RtsSet, concrete_int_op, int_arith,
)
from cpm.interp import CMP_FUNCS
from cpm.memory import Rts

from strategies import absexcs, absvals, bools, intervals, members, rts_sets

ARITH = ["+", "-", "*", "/", "%"]
CMPS = ["=", "<>", "<", "<=", ">=", ">"]


class TestIntervalBasics:
    def test_bottom_is_empty(self):
        assert INT_BOT.is_bottom and not INT_BOT.contains(0)
        assert Interval.of(3, 2) == INT_BOT

    def test_contains_excludes_booleans(self):
        assert not INT_TOP.contains(True)
        assert INT_TOP.contains(10 ** 30)

    @pytest.mark.parametrize("a,b,op,expected", [
        ((1, 3), (2, 4), "+", (3, 7)),
        ((1, 3), (2, 4), "-", (-3, 1)),
        ((-2, 3), (-4, 5), "*", (-12, 15)),
        ((-7, -7), (2, 2), "/", (-3, -3)),
        ((-7, -7), (2, 2), "%", (-1, -1)),
        ((10, 20), (0, 0), "/", None),
        ((10, 20), (-1, 1), "/", (-20, 20)),
        ((0, INF), (2, 2), "/", (0, INF)),
        ((5, 5), (NEG_INF, INF), "%", (0, 5)),
    ])
    def test_arith_examples(self, a, b, op, expected):
        got = int_arith(op, Interval(*a), Interval(*b))
        assert got == (INT_BOT if expected is None else Interval(*expected))

    def test_neg(self):
        assert Interval(NEG_INF, 3).neg() == Interval(-3, INF)

    @pytest.mark.parametrize("op,a,b,expected", [
        ("<", (0, 1), (2, 3), TT),
        ("<", (3, 4), (0, 3), FF),
        ("<", (0, 5), (2, 3), BOOL_TOP),
        ("=", (2, 2), (2, 2), TT),
        ("=", (0, 1), (5, 9), FF),
        ("<>", (0, 1), (5, 9), TT),
        (">=", (3, 9), (0, 3), TT),
    ])
    def test_cmp_examples(self, op, a, b, expected):
        assert Interval(*a).cmp(op, Interval(*b)) == expected

    def test_widen_jumps_to_infinity(self):
        assert Interval(0, 0).widen(Interval(0, 1)) == Interval(0, INF)
        assert Interval(0, 0).widen(Interval(-1, 0)) == Interval(NEG_INF, 0)
        assert Interval(0, 5).widen(Interval(1, 4)) == Interval(0, 5)


class TestIntervalLattice:
    @given(intervals(), intervals())
    def test_join_is_upper_bound(self, a, b):
        j = a.join(b)
        assert a.leq(j) and b.leq(j)

    @given(intervals(), intervals())
    def test_meet_is_lower_bound(self, a, b):
        m = a.meet(b)
        assert m.leq(a) and m.leq(b)

    @given(intervals(), intervals(), intervals())
    def test_join_associative(self, a, b, c):
        assert a.join(b.join(c)) == a.join(b).join(c)

    @given(intervals(), intervals())
    def test_join_commutative(self, a, b):
        assert a.join(b) == b.join(a)

    @given(intervals())
    def test_idempotent(self, a):
        assert a.join(a) == a and a.meet(a) == a

    @given(intervals(), intervals(), intervals())
    def test_leq_transitive(self, a, b, c):
        if a.leq(b) and b.leq(c):
            assert a.leq(c)

    @given(intervals(), intervals())
    def test_widen_is_upper_bound(self, a, b):
        w = a.widen(b)
        assert a.leq(w) and b.leq(w)


class TestIntervalSoundness:
    @given(st.sampled_from(ARITH), intervals(allow_bottom=False), intervals(allow_bottom=False), st.data())
    def test_arith_covers_concrete(self, op, a, b, data):
        x, y = data.draw(members(a)), data.draw(members(b))
        r = concrete_int_op(op, x, y)
        assume(r is not None)
        assert int_arith(op, a, b).contains(r)

    @given(st.sampled_from(CMPS), intervals(allow_bottom=False), intervals(allow_bottom=False), st.data())
    def test_cmp_covers_concrete(self, op, a, b, data):
        x, y = data.draw(members(a)), data.draw(members(b))
        assert a.cmp(op, b).contains(CMP_FUNCS[op](x, y))

    @given(st.sampled_from(ARITH), intervals())
    def test_strict(self, op, a):
        assert int_arith(op, a, INT_BOT).is_bottom
        assert int_arith(op, INT_BOT, a).is_bottom
        assert INT_BOT.cmp("<", a).is_bottom

    @given(st.lists(st.integers(-50, 50), min_size=1))
    def test_alpha_is_tightest(self, xs):
        i = Interval.alpha(xs)
        assert all(i.contains(x) for x in xs)
        assert i.lo in xs and i.hi in xs


class TestAbsBool:
    ALL = [BOOL_BOT, TT, FF, BOOL_TOP]

    @pytest.mark.parametrize("a,b", list(itertools.product(ALL, ALL)))
    def test_ops_cover_concrete(self, a, b):
        for x, y in itertools.product(a.values, b.values):
            assert a.and_(b).contains(x and y)
            assert a.or_(b).contains(x or y)
        for x in a.values:
            assert a.neg().contains(not x)

    @pytest.mark.parametrize("a", ALL)
    def test_strict(self, a):
        assert a.and_(BOOL_BOT).is_bottom and BOOL_BOT.or_(a).is_bottom
        assert BOOL_BOT.neg().is_bottom

    @given(bools, bools)
    def test_join_meet(self, a, b):
        assert a.leq(a.join(b)) and a.meet(b).leq(b)

    def test_contains_excludes_integers(self):
        assert not BOOL_TOP.contains(1)


class TestRtsSet:
    def test_minus_on_cofinite(self):
        s = RTS_TOP.minus("divbyzero")
        assert not s.contains("divbyzero") and s.contains("memerror")

    @given(rts_sets, rts_sets)
    def test_join_meet_bounds(self, a, b):
        j, m = a.join(b), a.meet(b)
        assert a.leq(j) and b.leq(j) and m.leq(a) and m.leq(b)

    @given(rts_sets, rts_sets, st.sampled_from(["divbyzero", "memerror", "zzz"]))
    def test_join_meet_pointwise(self, a, b, name):
        assert a.join(b).contains(name) == (a.contains(name) or b.contains(name))
        assert a.meet(b).contains(name) == (a.contains(name) and b.contains(name))

    def test_bottom_and_top(self):
        assert RTS_BOT.is_bottom and RTS_TOP.is_top and RTS_BOT.leq(RTS_TOP)


class TestProducts:
    @given(absvals, absvals)
    def test_absval_join(self, a, b):
        assert a.leq(a.join(b)) and b.leq(a.join(b))

    @given(absexcs, absexcs)
    def test_absexc_join(self, a, b):
        assert a.leq(a.join(b)) and b.leq(a.widen(b))

    @pytest.mark.parametrize("xi", [Rts("divbyzero"), 3, True])
    def test_alpha_contains(self, xi):
        assert AbsExc.alpha(xi).contains(xi)

    def test_int_and_bool_parts_are_separate(self):
        v = AbsVal.alpha(1)
        assert v.contains(1) and not v.contains(True)
        assert AbsExc.alpha(True).contains(True) and not AbsExc.alpha(True).contains(1)
