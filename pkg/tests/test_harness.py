"""Approximation relations and the differential checker."""

from __future__ import annotations

import pytest

from cpm import absmem as A
from cpm import memory as M
from cpm.analyzer import AnalysisConfig
from cpm.domains import AbsExc, AbsVal, Interval, TT
from cpm.generate import generate_programs
from cpm.harness import Verdict, approx_terminal, approx_value, differential_check
from cpm.memory import ExcState, Rts, initial_memory
from cpm.parser import parse
from cpm.plugins import DomainPlugin
from cpm.syntax import Arith
from cpm.absmem import vstate

from corpus_util import cases


class TestApproxTerminal:
    def test_values(self):
        assert approx_value(3, AbsVal.of_int(Interval(0, 5)))
        assert not approx_value(True, AbsVal.of_int(Interval(0, 5)))
        assert approx_value(True, AbsVal.of_bool(TT))

    def test_expression_terminals(self):
        m = initial_memory()
        am = A.alpha_mem(m)
        ok = (vstate(AbsVal.alpha(4), am), None)
        assert approx_terminal("e", (4, m), ok)
        assert not approx_terminal("e", (5, m), ok)
        assert not approx_terminal("e", ExcState(m, Rts("divbyzero")), ok)
        err = (None, A.AExcState(am, AbsExc.rts_of("divbyzero")))
        assert approx_terminal("e", ExcState(m, Rts("divbyzero")), err)

    def test_statement_and_catch_terminals(self):
        m = initial_memory()
        am = A.alpha_mem(m)
        assert approx_terminal("s", m, (am, None))
        assert not approx_terminal("s", m, (None, None))
        exc = ExcState(m, 3)
        rest = A.AExcState(am, AbsExc.alpha(3))
        assert approx_terminal("k", (False, exc), ((None, None), rest))
        assert approx_terminal("k", (True, m), ((am, None), None))

    def test_declaration_terminals(self):
        m, loc = M.new_data(initial_memory(), 1)
        env = {"g": M.Loc}  # any value: environments are compared for equality
        assert approx_terminal("d", (env, m), (env, A.alpha_mem(m), None))
        assert not approx_terminal("d", (env, m), ({}, A.alpha_mem(m), None))

    def test_unknown_category(self):
        with pytest.raises(ValueError):
            approx_terminal("z", None, None)


class BrokenPlugin(DomainPlugin):
    """Claims every sum is zero: unsound on purpose."""

    def supported(self, env, node, mem):
        return isinstance(node, Arith) and node.op == "+"

    def eval(self, env, node, mem):
        return vstate(AbsVal.alpha(0), mem), None


class TestDifferential:
    @pytest.mark.parametrize("case", [c for c in cases() if c.valid], ids=lambda c: c.name)
    def test_corpus_is_sound(self, case):
        cfg = AnalysisConfig(data_capacity=case.data_capacity, stack_capacity=case.stack_capacity)
        v = differential_check(case.program(), case.budget, cfg)
        assert v.ok, str(v)
        assert v.kind == ("inconclusive" if case.expect == "budget" else "sound")

    def test_detects_unsound_plugin(self):
        p = parse("function main() = let lvar x : integer = 1 in x := x + 1 result x")
        v = differential_check(p, config=AnalysisConfig(plugin=BrokenPlugin()))
        assert v.kind == "violation" and not v.ok

    def test_broken_plugin_caught_on_generated_programs(self):
        caught = sum(not differential_check(generate_programs(s, 6), 10 ** 4,
                                            AnalysisConfig(plugin=BrokenPlugin())).ok
                     for s in range(1, 41))
        assert caught >= 20

    def test_extern_under_reject_is_inconclusive(self):
        p = parse("function e() = extern : integer;\nfunction main() = let lvar x : integer = 0 in x := e() result x")
        v = differential_check(p, extern_policy="reject")
        assert v.kind == "inconclusive" and v.ok

    def test_analysis_cap_is_not_ok(self):
        p = parse("function main() = let lvar x : integer = 0 in while x < 9 do x := x + 1 result x")
        v = differential_check(p, config=AnalysisConfig(max_iterations=1))
        assert v.kind == "inconclusive" and not v.analysis_terminated and not v.ok

    def test_per_label_checks_count(self):
        p = parse("function main() = let lvar x : integer = 0 in while x < 3 do x := x + 1 result x")
        assert differential_check(p).labels_checked > 3
        assert differential_check(p, per_label=False).labels_checked == 0

    def test_verdict_rendering(self):
        v = Verdict("violation", "bad", (3, 4))
        assert str(v) == "violation at 3, 4: bad"
        assert v.to_json()["path"] == [3, 4]
