"""Acceptance suite: one group of tests per criterion.  The terminal summary
(see conftest.py) prints a single PASS/FAIL line for each criterion."""

from __future__ import annotations

import itertools
import random
import time
from fractions import Fraction

import pytest

from cpm.analyzer import AnalysisConfig, analyze_program
from cpm.domains import (
    AbsBool, BOOL_BOT, BOOL_TOP, FF, INF, INT_BOT, INT_TOP, NEG_INF, TT, Interval, int_arith,
)
from cpm.generate import generate_programs
from cpm.harness import differential_check
from cpm.interp import BudgetExhausted, Completed, run_program
from cpm.parser import parse
from cpm.plugins import SquarePlugin
from cpm.statics import check_program
from cpm.syntax import Arith, Assign, While, walk

from corpus_util import cases, observe

criterion = pytest.mark.criterion


def compile_(src: str):
    p = parse(src)
    check_program(p)
    return p


# ---------------------------------------------------------------- independent oracles


def o_div(x: int, y: int):
    return None if y == 0 else int(Fraction(x, y))


def o_mod(x: int, y: int):
    return None if y == 0 else x - y * int(Fraction(x, y))


ORACLE = {
    "+": lambda x, y: x + y, "-": lambda x, y: x - y, "*": lambda x, y: x * y, "/": o_div, "%": o_mod,
    "=": lambda x, y: x == y, "<>": lambda x, y: x != y, "<": lambda x, y: x < y,
    "<=": lambda x, y: x <= y, ">=": lambda x, y: x >= y, ">": lambda x, y: x > y,
}
ARITH = ["+", "-", "*", "/", "%"]
CMPS = ["=", "<>", "<", "<=", ">=", ">"]


def abstract(op, a, b):
    return int_arith(op, a, b) if op in ARITH else a.cmp(op, b)


# ---------------------------------------------------------------- 1


@criterion(1, "concrete-semantics fidelity on the corpus (exact match, < 5 s)")
def test_c1_corpus_fidelity():
    suite = cases()
    assert len(suite) >= 40
    start = time.perf_counter()
    mismatches = [(c.name, c.expect, got) for c in suite if (got := observe(c)) != c.expect]
    elapsed = time.perf_counter() - start
    assert mismatches == []
    assert elapsed < 5.0, f"{elapsed:.2f}s"


@criterion(1, "concrete-semantics fidelity on the corpus (exact match, < 5 s)")
@pytest.mark.parametrize("name,expect", [
    ("fact_loop", "exit 120"), ("fact_rec", "exit 120"), ("div0", "exception divbyzero"),
    ("div_trunc", "exit -3"), ("mod_trunc", "exit -1"), ("short_circuit_and", "exit 0"),
    ("finally_masks", "exception memerror"), ("catch_by_type", "exit 1"), ("catch_by_name", "exit 2"),
    ("catch_int_not_rts", "exit 2"), ("stack_overflow", "exception stkovflw"),
])
def test_c1_required_programs(name, expect):
    case = next(c for c in cases() if c.name == name)
    assert case.expect == expect and observe(case) == expect


@criterion(1, "concrete-semantics fidelity on the corpus (exact match, < 5 s)")
def test_c1_short_circuit_value_is_ff():
    src = ("function main() = let lvar b : boolean = false and (1 / 0 = 0); lvar r : integer = 5 "
           "in if b then r := 1 else r := 0 result r")
    from cpm.interp import eval_expr
    from cpm.memory import initial_memory
    from cpm.parser import parse_fragment
    out = eval_expr({}, parse_fragment("false and (1 / 0 = 0)", "expr"), initial_memory()).value
    assert out[0] is False
    assert run_program(compile_(src)).value.exit_value == 0


# ---------------------------------------------------------------- 2

FINITE = [Interval(lo, hi) for lo in range(-10, 11) for hi in range(lo, 11)]
UNBOUNDED = ([Interval(NEG_INF, k) for k in (-10, -3, 0, 3, 10)]
             + [Interval(k, INF) for k in (-10, -3, 0, 3, 10)] + [INT_TOP])


def samples(i: Interval) -> list:
    """All members of a finite interval; a spread of members of an unbounded one."""
    if i.lo != NEG_INF and i.hi != INF:
        return list(range(i.lo, i.hi + 1))
    anchor = i.hi if i.lo == NEG_INF else i.lo
    sign = -1 if i.lo == NEG_INF else 1
    pts = {anchor, anchor + sign, anchor + 7 * sign, anchor + 1000 * sign}
    if i.lo == NEG_INF and i.hi == INF:
        pts |= {0, 1, -1, 10 ** 9, -10 ** 9}
    return sorted(p for p in pts if i.contains(p))


def _rect_check(op) -> list:
    """Exhaustive check over all pairs of finite intervals: running minima and
    maxima of the oracle over each rectangle (gamma of an interval is convex,
    and {tt, ff} are ordered as False < True)."""
    bad = []
    table = {(x, y): ORACLE[op](x, y) for x in range(-10, 11) for y in range(-10, 11)}
    for a in range(-10, 11):
        colmin = {y: None for y in range(-10, 11)}
        colmax = dict(colmin)
        for b in range(a, 11):
            for y in range(-10, 11):
                v = table[(b, y)]
                if v is not None:
                    colmin[y] = v if colmin[y] is None else min(colmin[y], v)
                    colmax[y] = v if colmax[y] is None else max(colmax[y], v)
            X = Interval(a, b)
            for c in range(-10, 11):
                lo = hi = None
                for d in range(c, 11):
                    if colmin[d] is not None:
                        lo = colmin[d] if lo is None else min(lo, colmin[d])
                        hi = colmax[d] if hi is None else max(hi, colmax[d])
                    if lo is None:
                        continue
                    r = abstract(op, X, Interval(c, d))
                    if not (r.contains(lo) and r.contains(hi)):
                        bad.append((op, X, Interval(c, d), lo, hi, r))
    return bad


def _sampled_check(op) -> list:
    bad = []
    pairs = itertools.chain(itertools.product(UNBOUNDED, FINITE + UNBOUNDED), itertools.product(FINITE, UNBOUNDED))
    for a, b in pairs:
        r = abstract(op, a, b)
        for x in samples(a):
            for y in samples(b):
                v = ORACLE[op](x, y)
                if v is not None and not r.contains(v):
                    bad.append((op, a, b, x, y, r))
    return bad


@criterion(2, "abstract-domain soundness by enumeration (zero counterexamples, < 60 s)")
def test_c2_domain_enumeration():
    start = time.perf_counter()
    bad = []
    for op in ARITH + CMPS:
        bad += _rect_check(op)
        bad += _sampled_check(op)
    # unary minus
    for a in FINITE + UNBOUNDED:
        bad += [("neg", a, x) for x in samples(a) if not a.neg().contains(-x)]
    # Bool# operations, exhaustively
    every = [BOOL_BOT, TT, FF, BOOL_TOP]
    for a, b in itertools.product(every, every):
        for x, y in itertools.product(a.values, b.values):
            if not (a.and_(b).contains(x and y) and a.or_(b).contains(x or y)):
                bad.append(("bool", a, b, x, y))
        bad += [("not", a, x) for x in a.values if not a.neg().contains(not x)]
    elapsed = time.perf_counter() - start
    assert bad == [], bad[:5]
    assert elapsed < 60.0, f"{elapsed:.1f}s"


@criterion(2, "abstract-domain soundness by enumeration (zero counterexamples, < 60 s)")
def test_c2_strictness():
    for op in ARITH + CMPS:
        for a in FINITE[::17] + UNBOUNDED:
            assert abstract(op, a, INT_BOT).is_bottom and abstract(op, INT_BOT, a).is_bottom
    assert AbsBool().and_(BOOL_TOP).is_bottom and AbsBool().neg().is_bottom


# ---------------------------------------------------------------- 3


def random_interval(rng: random.Random) -> Interval:
    k = rng.random()
    if k < 0.05:
        return INT_BOT
    lo = NEG_INF if rng.random() < 0.15 else rng.randint(-50, 50)
    hi = INF if rng.random() < 0.15 else rng.randint(-50, 50)
    if lo != NEG_INF and hi != INF and lo > hi:
        lo, hi = hi, lo
    return Interval(lo, hi)


@criterion(3, "widening laws (10^4 pairs, 10^3 chains stable within 4 steps)")
def test_c3_widening_upper_bound():
    rng = random.Random(20_240_311)
    failures = []
    for _ in range(10 ** 4):
        x, y = random_interval(rng), random_interval(rng)
        if rng.random() < 0.5:
            y = y.meet(x)  # exercise the premise y <= x often
        w = x.widen(y)
        if not (x.leq(w) and y.leq(w)):
            failures.append((x, y, w))
        if y.leq(x) and not x.leq(y.widen(x)):
            failures.append((y, x, y.widen(x)))
    assert failures == []


@criterion(3, "widening laws (10^4 pairs, 10^3 chains stable within 4 steps)")
def test_c3_widening_chains_stabilize():
    rng = random.Random(7)
    failures = []
    for _ in range(10 ** 3):
        c = random_interval(rng)
        w = c
        history = [w]
        for _ in range(rng.randint(5, 40)):
            c = c.join(random_interval(rng))  # increasing chain
            w = w.widen(c)
            history.append(w)
        # the widened sequence may rise at most 4 times, however long the chain
        rises = sum(1 for a, b in zip(history, history[1:]) if a != b)
        if rises > 4 or not all(a.leq(b) for a, b in zip(history, history[1:])):
            failures.append(history)
    assert failures == []


# ---------------------------------------------------------------- 4


@criterion(4, "loop precision: post-loop i has lower bound 10 and contains 10")
def test_c4_loop_precision():
    src = ("function main() = let lvar i : integer = 0; lvar after : integer = 0 "
           "in (i := 0; while i < 10 do i := i + 1; after := i) result i")
    p = compile_(src)
    r = analyze_program(p)
    assert r.exit_value.lo == 10 and r.exit_value.contains(10)
    # also at the statement right after the loop
    assign = next(n for n in walk(p.glob) if isinstance(n, Assign) and n.target == "after")
    slot = r.analyzer.seen[assign.label].top.slots[-2]
    assert slot.value.lo == 10 and slot.value.contains(10)


# ---------------------------------------------------------------- 5


@criterion(5, "definite information: dead code after throw is bottom; while true terminates < 1 s")
def test_c5_unreachable_after_throw():
    src = ("function main() = let lvar x : integer = 0 in "
           "try (throw divbyzero; x := 2) catch (any) x := 1 result x")
    p = compile_(src)
    r = analyze_program(p)
    dead = next(n for n in walk(p.glob) if isinstance(n, Assign) and n.target == "x"
                and getattr(n.expr, "value", None) == 2)
    assert r.analyzer.seen.get(dead.label) is None
    row = next(row for row in r.labels if row["label"] == dead.label)
    assert row["mem"] == "⊥" and dead.label in r.verdicts["unreachable"]


@criterion(5, "definite information: dead code after throw is bottom; while true terminates < 1 s")
def test_c5_while_true():
    src = "function main() = let lvar x : integer = 0 in while true do nop result x"
    p = compile_(src)
    start = time.perf_counter()
    r = analyze_program(p)
    elapsed = time.perf_counter() - start
    loop = next(n for n in walk(p.glob) if isinstance(n, While))
    assert r.analyzer.post[loop.label] == (None, None)
    assert elapsed < 1.0


# ---------------------------------------------------------------- 6


def _division_case(init: int, cond: str, step: str):
    src = (f"function main() = let lvar d : integer = {init}; lvar x : integer = 0 "
           f"in while {cond} do (x := 100 / d; d := {step}) result x")
    p = compile_(src)
    r = analyze_program(p)
    div = next(n for n in walk(p.glob) if isinstance(n, Arith) and n.op == "/")
    assign = next(n for n in walk(p.glob) if isinstance(n, Assign) and n.target == "x")
    locals_ = [slot for slot in r.analyzer.seen[assign.label].top.slots if not isinstance(slot, str)]
    divisor = locals_[-2].value  # d, declared just before x
    return r, div.label, divisor


@criterion(6, "divbyzero verdict precision at the division's label")
def test_c6_divisor_one_to_five_is_impossible():
    r, _, divisor = _division_case(1, "d <= 5", "d + 1")
    assert divisor == Interval(1, 5)
    assert r.verdicts["divbyzero"] == {"verdict": "impossible", "labels": []}


@criterion(6, "divbyzero verdict precision at the division's label")
def test_c6_divisor_zero_to_three_is_possible():
    r, label, divisor = _division_case(3, "d >= 0", "d - 1")
    assert divisor == Interval(0, 3)
    assert r.verdicts["divbyzero"] == {"verdict": "possible", "labels": [label]}


# ---------------------------------------------------------------- 7 and 9


def generated():
    return [(f"seed={s}", generate_programs(s, 3 + s % 10), 10 ** 5, {}) for s in range(1, 501)]


def corpus_inputs():
    return [(c.name, c.program(), c.budget, dict(data_capacity=c.data_capacity, stack_capacity=c.stack_capacity))
            for c in cases() if c.valid]


def differential_campaign(plugin=None):
    start = time.perf_counter()
    verdicts = []
    for name, program, budget, caps in generated() + corpus_inputs():
        cfg = AnalysisConfig(plugin=plugin, **caps) if plugin else AnalysisConfig(**caps)
        verdicts.append((name, differential_check(program, budget, cfg)))
    return verdicts, time.perf_counter() - start


@criterion(7, "differential soundness: 500 seeds + corpus, zero violations, < 5 min")
def test_c7_differential_soundness():
    verdicts, elapsed = differential_campaign()
    violations = [(n, str(v)) for n, v in verdicts if v.kind == "violation"]
    unterminated = [n for n, v in verdicts if not v.analysis_terminated]
    assert len(verdicts) >= 500 + 40
    assert violations == []
    assert unterminated == []
    assert elapsed < 300, f"{elapsed:.0f}s"


# ---------------------------------------------------------------- 8


@criterion(8, "type soundness: accepted programs never get stuck")
def test_c8_no_stuck_states():
    programs = [generate_programs(s, 3 + s % 10) for s in range(1, 501)]
    for c in cases():
        if c.valid:
            # the corpus is run under its own flags
            out = run_program(c.program(), c.budget, data_capacity=c.data_capacity,
                              stack_capacity=c.stack_capacity, extern_policy="havoc-error")
            assert isinstance(out, (Completed, BudgetExhausted)), c.name
    for p in programs:
        out = run_program(p, 10 ** 5, extern_policy="havoc-error")
        assert isinstance(out, (Completed, BudgetExhausted))


# ---------------------------------------------------------------- 9

SQUARE = ("function ext() = extern : integer;\n"
          "function main() = let lvar x : integer = 0; lvar y : integer = 0 "
          "in (x := ext(); y := x * x) result y")


@criterion(9, "plugin seam: x*x narrows from top to [0,+inf] and criterion 7 still holds")
def test_c9_square_plugin_narrows():
    p = compile_(SQUARE)
    plain = analyze_program(p)
    squared = analyze_program(p, AnalysisConfig(plugin=SquarePlugin()))
    assert plain.exit_value == INT_TOP
    assert squared.exit_value.leq(Interval(0, INF)) and not squared.exit_value.is_bottom


@criterion(9, "plugin seam: x*x narrows from top to [0,+inf] and criterion 7 still holds")
def test_c9_differential_with_plugin():
    verdicts, elapsed = differential_campaign(SquarePlugin())
    assert [(n, str(v)) for n, v in verdicts if v.kind == "violation"] == []
    assert all(v.analysis_terminated for _, v in verdicts)
    assert elapsed < 300
