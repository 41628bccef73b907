"""Loading the ``corpus/`` programs and their ``-- expect:`` headers."""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from pathlib import Path

from cpm.interp import BudgetExhausted, run_program
from cpm.memory import DEFAULT_DATA_CAPACITY, DEFAULT_STACK_CAPACITY, Rts, show_value
from cpm.parser import ParseError, parse
from cpm.statics import ValidityError, check_program

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


@dataclass(frozen=True)
class Case:
    name: str
    source: str
    expect: str  # "exit N" | "exception X" | "invalid KIND" | "budget"
    budget: int = 10 ** 5
    data_capacity: int = DEFAULT_DATA_CAPACITY
    stack_capacity: int = DEFAULT_STACK_CAPACITY
    extern: str = "reject"

    @property
    def valid(self) -> bool:
        return not self.expect.startswith("invalid")

    def program(self):
        p = parse(self.source)
        check_program(p)
        return p


def _flags(text: str) -> dict:
    toks, out = shlex.split(text), {}
    keys = {"--budget": "budget", "--data-capacity": "data_capacity",
            "--stack-capacity": "stack_capacity", "--extern": "extern"}
    for flag, val in zip(toks[::2], toks[1::2]):
        key = keys[flag]
        out[key] = val if key == "extern" else int(val)
    return out


def load(path: Path) -> Case:
    source = path.read_text(encoding="utf-8")
    expect, flags = None, {}
    for line in source.splitlines():
        if line.startswith("-- expect:"):
            expect = line.split(":", 1)[1].strip()
        elif line.startswith("-- flags:"):
            flags = _flags(line.split(":", 1)[1])
    assert expect, f"{path.name} has no expect header"
    return Case(path.stem, source, expect, **flags)


def cases() -> list[Case]:
    return [load(p) for p in sorted(CORPUS.glob("*.cpm"))]


def observe(case: Case) -> str:
    """What actually happens, in the header's vocabulary."""
    try:
        program = case.program()
    except ParseError:
        return "invalid parse"
    except ValidityError as exc:
        return f"invalid {exc.kind}"
    res = run_program(program, case.budget, data_capacity=case.data_capacity,
                      stack_capacity=case.stack_capacity, extern_policy=case.extern)
    if isinstance(res, BudgetExhausted):
        return "budget"
    r = res.value
    if r.exception is None:
        return f"exit {r.exit_value}"
    exc = r.exception
    return f"exception {exc.name if isinstance(exc, Rts) else show_value(exc)}"
