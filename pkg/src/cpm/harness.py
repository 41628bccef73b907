"""Executable approximation relations and differential soundness checking.

``approx_*`` decide whether a concrete object is described by an abstract one
(membership in the concretization).  ``differential_check`` runs a program
both ways and compares the outcomes at the program level and, best effort,
at every statement label the concrete run visited.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import memory as M
from .absmem import AExcState, AbsMem
from .analyzer import AnalysisConfig, IterationCapExceeded, analyze_program
from .domains import AbsVal
from .interp import BudgetExhausted, ExternUnsupported, run_program
from .memory import ExcState, Mem


# ---------------------------------------------------------------- approximation


def approx_value(v, a: AbsVal) -> bool:
    return a.contains(v)


def _approx_frame(cells, frame: tuple, af) -> bool:
    if af.open:
        if len(frame) < len(af.slots):
            return False
    elif len(frame) != len(af.slots):
        return False
    for s, a in zip(frame, af.slots):
        if isinstance(a, str):
            if s != a:
                return False
            continue
        if not isinstance(s, M.Loc) or (s, a.stype) not in cells:
            return False
        if not a.value.contains(cells[(s, a.stype)]):
            return False
    return True


def approx_mem(mem: Mem, amem: Optional[AbsMem]) -> bool:
    """sigma is described by sigma#: cellwise membership plus shape agreement."""
    if amem is None:
        return False
    for (loc, st), v in mem.cells.items():
        if loc.segment != "data":
            continue
        cell = amem.data.get((loc, st))
        if cell is None or not cell.value.contains(v):
            return False
    for key, cell in amem.data.items():
        if cell.definite and key not in mem.cells:
            return False
    frames = M.frames(mem.stack)
    k = len(amem.frames)
    if len(frames) < k or (len(frames) > k and not amem.deep):
        return False
    return all(_approx_frame(mem.cells, f, af) for f, af in zip(frames[len(frames) - k:], amem.frames))


def approx_exception(xi, axc) -> bool:
    return axc.contains(xi)


def approx_exc_state(state: ExcState, astate: Optional[AExcState]) -> bool:
    if astate is None:
        return False
    return approx_exception(state.exc, astate.exc) and approx_mem(state.mem, astate.mem)


def approx_terminal(category: str, eta, aeta) -> bool:
    """eta described by eta#, for categories e (expressions), d/g (declarations),
    s/b (statements and bodies) and k (catch clauses)."""
    if category == "e":
        v, err = aeta
        if isinstance(eta, ExcState):
            return approx_exc_state(eta, err)
        value, mem = eta
        return v is not None and v.val.contains(value) and approx_mem(mem, v.mem)
    if category in ("d", "g"):
        env, amem, err = aeta
        if isinstance(eta, ExcState):
            return approx_exc_state(eta, err)
        rho, mem = eta
        return env is not None and rho == env and approx_mem(mem, amem)
    if category in ("s", "b"):
        amem, err = aeta
        if isinstance(eta, ExcState):
            return approx_exc_state(eta, err)
        return approx_mem(eta, amem)
    if category == "k":
        caught, rest = aeta
        was_caught, out = eta
        if was_caught:
            return approx_terminal("s", out, caught)
        return approx_exc_state(out, rest)
    raise ValueError(category)


# ---------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class Verdict:
    kind: str  # "sound" | "violation" | "inconclusive"
    reason: str = ""
    path: tuple = ()  # labels locating the discrepancy
    concrete: object = field(default=None, compare=False)
    abstract: object = field(default=None, compare=False)
    analysis_terminated: bool = True
    labels_checked: int = 0

    @property
    def ok(self) -> bool:
        """Sound, or inconclusive with a terminating analysis."""
        return self.kind == "sound" or (self.kind == "inconclusive" and self.analysis_terminated)

    def __str__(self) -> str:
        where = f" at {', '.join(map(str, self.path))}" if self.path else ""
        why = f": {self.reason}" if self.reason else ""
        return f"{self.kind}{where}{why}"

    def to_json(self) -> dict:
        return {
            "verdict": self.kind, "reason": self.reason, "path": list(self.path),
            "analysis_terminated": self.analysis_terminated, "labels_checked": self.labels_checked,
        }


def _describe(x) -> str:
    if isinstance(x, ExcState):
        return f"exception {x.exc} with {x.mem.to_json()}"
    if isinstance(x, Mem):
        return str(x.to_json())
    return str(x)


def differential_check(program, budget: int = 10 ** 5, config: AnalysisConfig | None = None, *,
                       extern_policy: str = "havoc-error", per_label: bool = True) -> Verdict:
    """Run ``program`` concretely and abstractly and compare the outcomes."""
    config = config or AnalysisConfig()
    try:
        report = analyze_program(program, config)
    except IterationCapExceeded as exc:
        return Verdict("inconclusive", f"analysis did not stabilize: {exc}", analysis_terminated=False)

    record: dict | None = {} if per_label else None
    try:
        outcome = run_program(program, budget, data_capacity=config.data_capacity,
                              stack_capacity=config.stack_capacity, extern_policy=extern_policy,
                              record=record)
    except ExternUnsupported:
        return Verdict("inconclusive", "extern call under the reject policy")

    checked = 0
    if per_label:
        seen = report.analyzer.seen
        for label in sorted(l for l in record if l > 0):
            amem = seen.get(label)
            for mem in record[label]:
                checked += 1
                if not approx_mem(mem, amem):
                    return Verdict("violation", "statement entry memory not described by the analysis",
                                   (label,), _describe(mem), str(amem), labels_checked=checked)

    if isinstance(outcome, BudgetExhausted):
        return Verdict("inconclusive", "concrete budget exhausted", (outcome.label,), labels_checked=checked)
    res = outcome.value

    if res.globals_env is None:
        state = ExcState(res.memory, res.exception)
        if not approx_exc_state(state, report.globals_exc):
            return Verdict("violation", "global declaration exception not described", (),
                           _describe(state), str(report.globals_exc), labels_checked=checked)
        return Verdict("sound", labels_checked=checked)

    if report.globals_env is None or res.globals_env != report.globals_env:
        return Verdict("violation", "global environments differ", (), res.globals_env,
                       report.globals_env, labels_checked=checked)
    if not approx_mem(res.globals_mem, report.globals_mem):
        return Verdict("violation", "memory after the globals not described", (),
                       _describe(res.globals_mem), str(report.globals_mem), labels_checked=checked)
    if not approx_terminal("s", res.final, report.final):
        m, e = report.final
        return Verdict("violation", "final state of main not described", (), _describe(res.final),
                       f"{m} / {e}", labels_checked=checked)
    if res.exit_value is not None and not report.exit_value.contains(res.exit_value):
        return Verdict("violation", "exit value not described", (), res.exit_value,
                       str(report.exit_value), labels_checked=checked)
    return Verdict("sound", labels_checked=checked)
