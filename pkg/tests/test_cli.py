"""The ``cpm`` command line."""

from __future__ import annotations

import io
import json
import subprocess
import sys

import pytest

from cpm.cli import FINDINGS, INVALID, OK, main

from corpus_util import CORPUS


def cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def path(name: str) -> str:
    return str(CORPUS / f"{name}.cpm")


class TestCheck:
    def test_valid(self):
        assert cli("check", path("fact_rec")) == (OK, f"{path('fact_rec')}: ok\n")

    @pytest.mark.parametrize("name", ["bad_main", "ill_typed", "parse_error", "no_main"])
    def test_invalid(self, name):
        code, out = cli("check", path(name))
        assert code == INVALID and name in out

    def test_json(self):
        code, out = cli("check", "--format", "json", path("bad_main"))
        data = json.loads(out)
        assert code == INVALID and data["valid"] is False and "missing-or-wrong-main" in data["error"]

    def test_missing_file(self, capsys):
        assert cli("check", "/nonexistent.cpm")[0] == INVALID


class TestRun:
    def test_exit_value(self):
        code, out = cli("run", path("fact_loop"))
        assert code == OK and out.strip().endswith("exit 120")

    def test_exception_is_a_finding(self):
        code, out = cli("run", "--format", "json", path("div0"))
        assert code == FINDINGS and json.loads(out)["exception"] == "divbyzero"

    def test_budget(self):
        code, out = cli("run", "--budget", "1000", path("infinite_loop"))
        assert code == FINDINGS and "budget exhausted" in out

    def test_capacity_flag(self):
        code, out = cli("run", "--stack-capacity", "8", path("stack_overflow"))
        assert code == FINDINGS and "stkovflw" in out

    def test_extern_policies(self, capsys):
        assert cli("run", path("extern_call"))[0] == INVALID
        code, out = cli("run", "--extern", "havoc-error", path("extern_call"))
        assert code == FINDINGS and "externcall" in out

    def test_trace(self):
        code, out = cli("run", "--trace", path("params"))
        assert code == OK and "stmt" in out and "mem" in out

    def test_invalid_program(self, capsys):
        assert cli("run", path("ill_typed"))[0] == INVALID
        assert "ill-typed" in capsys.readouterr().err


class TestAnalyze:
    def test_clean(self):
        code, out = cli("analyze", path("globals"))
        assert code == OK and "exit" in out

    def test_possible_error_is_a_finding(self):
        code, out = cli("analyze", "--format", "json", path("fact_rec"))
        data = json.loads(out)
        assert code == FINDINGS and data["verdicts"]["stack_overflow"]["verdict"] == "possible"
        assert data["config_echo"]["widening_delay"] == 0

    def test_flags_reach_the_analyzer(self):
        _, out = cli("analyze", "--format", "json", "--widening-delay", "15", "--plugin", "square",
                     "--no-memo", path("loop_to_ten"))
        data = json.loads(out)
        assert data["exit"] == "[10,10]"
        assert data["config_echo"]["plugin"] == "SquarePlugin" and data["config_echo"]["memoize"] is False


class TestDiff:
    def test_files_and_generated(self):
        code, out = cli("diff", "--count", "5", path("fib"))
        assert code == OK and "summary: sound 6" in out

    def test_json(self):
        code, out = cli("diff", "--format", "json", "--count", "3", "--seed", "10")
        data = json.loads(out)
        assert code == OK and [r["input"] for r in data["results"]][0] == "seed=10 size=3"

    def test_needs_input(self, capsys):
        assert cli("diff")[0] == INVALID


class TestUsage:
    def test_unknown_verb(self, capsys):
        assert cli("frobnicate")[0] == INVALID

    def test_help(self, capsys):
        assert cli("--help")[0] == OK

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "cpm", "run", path("gcd")], capture_output=True, text=True)
        assert r.returncode == OK and "exit 6" in r.stdout
