"""Command-line front end: ``cpm {check,run,analyze,diff}``.

Exit codes: 0 clean, 1 findings (an exception, a possible error, a
violation), 2 invalid input or usage, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from .analyzer import AnalysisConfig, IterationCapExceeded, analyze_program
from .generate import generate_programs
from .harness import differential_check
from .interp import DEFAULT_BUDGET, BudgetExhausted, ExternUnsupported, run_program
from .memory import DEFAULT_DATA_CAPACITY, DEFAULT_STACK_CAPACITY, show_value
from .parser import ParseError, parse
from .plugins import DomainPlugin, SquarePlugin
from .statics import ValidityError, check_program

OK, FINDINGS, INVALID, INTERNAL = 0, 1, 2, 3

PLUGINS = {"none": DomainPlugin, "square": SquarePlugin}


class _Invalid(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2)


def _load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        raise _Invalid(f"{path}: {exc.strerror}") from exc
    try:
        program = parse(source)
        check_program(program)
    except ParseError as exc:
        raise _Invalid(f"{path}:{exc}") from exc
    except ValidityError as exc:
        raise _Invalid(f"{path}: ValidityError({exc})") from exc
    return program


def _config(args) -> AnalysisConfig:
    return AnalysisConfig(
        widening_delay=args.widening_delay,
        plugin=PLUGINS[args.plugin](),
        memoize=not args.no_memo,
        data_capacity=args.data_capacity,
        stack_capacity=args.stack_capacity,
    )


# ---------------------------------------------------------------- verbs


def cmd_check(args, out) -> int:
    code = OK
    for path in args.files:
        try:
            _load(path)
        except _Invalid as exc:
            if args.format == "json":
                out.write(_dump({"file": path, "valid": False, "error": str(exc)}) + "\n")
            else:
                out.write(f"{exc}\n")
            code = INVALID
            continue
        out.write(_dump({"file": path, "valid": True}) + "\n" if args.format == "json" else f"{path}: ok\n")
    return code


def cmd_run(args, out) -> int:
    code = OK
    for path in args.files:
        program = _load(path)
        trace = None
        if args.trace:
            def trace(rule, label, mem):
                out.write(f"  {rule:<5} {label:>6}  mem {mem.digest()}\n")
        try:
            res = run_program(program, args.budget, data_capacity=args.data_capacity,
                              stack_capacity=args.stack_capacity, extern_policy=args.extern, trace=trace)
        except ExternUnsupported as exc:
            raise _Invalid(f"{path}: {exc}") from exc
        if isinstance(res, BudgetExhausted):
            payload = {"file": path, "outcome": "budget-exhausted", "label": res.label}
            text = f"{path}: budget exhausted at label {res.label}"
            code = max(code, FINDINGS)
        else:
            r = res.value
            if r.exception is None:
                payload = {"file": path, "outcome": "exit", "value": r.exit_value}
            else:
                payload = {"file": path, "outcome": "exception", "exception": show_value(r.exception)
                           if not hasattr(r.exception, "name") else r.exception.name}
                code = max(code, FINDINGS)
            payload["memory"] = r.memory.to_json()
            text = f"{path}: {r.describe()}"
        out.write(_dump(payload) + "\n" if args.format == "json" else text + "\n")
    return code


def cmd_analyze(args, out) -> int:
    code = OK
    for path in args.files:
        program = _load(path)
        report = analyze_program(program, _config(args))
        if args.format == "json":
            out.write(_dump({"file": path, **report.to_json()}) + "\n")
        else:
            out.write(f"== {path}\n{report.text()}\n")
        if report.has_findings:
            code = FINDINGS
    return code


def cmd_diff(args, out) -> int:
    items = [(path, _load(path)) for path in args.files]
    if args.count:
        for i in range(args.count):
            seed = args.seed + i
            size = args.size if args.size else 3 + seed % 10
            items.append((f"seed={seed} size={size}", generate_programs(seed, size)))
    code = OK
    results = []
    for name, program in items:
        v = differential_check(program, args.budget, _config(args), extern_policy=args.extern)
        results.append({"input": name, **v.to_json()})
        if args.format != "json":
            out.write(f"{name}: {v}\n")
        if not v.ok:
            code = FINDINGS
    if args.format == "json":
        out.write(_dump({"results": results}) + "\n")
    else:
        counts = {}
        for r in results:
            counts[r["verdict"]] = counts.get(r["verdict"], 0) + 1
        out.write("summary: " + ", ".join(f"{k} {v}" for k, v in sorted(counts.items())) + "\n")
    return code


# ---------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="concrete step budget")
    common.add_argument("--widening-delay", type=int, default=0, help="plain joins before widening")
    common.add_argument("--extern", choices=["reject", "havoc-error"], default="reject",
                        help="what a concrete call to an extern function does")
    common.add_argument("--data-capacity", type=int, default=DEFAULT_DATA_CAPACITY)
    common.add_argument("--stack-capacity", type=int, default=DEFAULT_STACK_CAPACITY)
    common.add_argument("--trace", action="store_true", help="print every concrete rule application")
    common.add_argument("--format", choices=["json", "text"], default="text")
    common.add_argument("--plugin", choices=sorted(PLUGINS), default="none", help="abstract domain plugin")
    common.add_argument("--no-memo", action="store_true", help="disable analysis memoization")

    p = argparse.ArgumentParser(prog="cpm", description="CPM checker, interpreter and analyzer")
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("check", parents=[common], help="parse and type check").add_argument("files", nargs="+")
    sub.add_parser("run", parents=[common], help="run concretely").add_argument("files", nargs="+")
    sub.add_parser("analyze", parents=[common], help="abstract interpretation").add_argument("files", nargs="+")
    d = sub.add_parser("diff", parents=[common], help="differential soundness check")
    d.add_argument("files", nargs="*")
    d.add_argument("--seed", type=int, default=1, help="first generator seed")
    d.add_argument("--count", type=int, default=0, help="number of generated programs")
    d.add_argument("--size", type=int, default=0, help="generator size (default: varies with the seed)")
    return p


VERBS = {"check": cmd_check, "run": cmd_run, "analyze": cmd_analyze, "diff": cmd_diff}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INVALID if exc.code else OK
    if args.verb == "diff" and not args.files and not args.count:
        parser.print_usage(sys.stderr)
        sys.stderr.write("cpm diff: give input files or --count\n")
        return INVALID
    try:
        return VERBS[args.verb](args, out)
    except _Invalid as exc:
        sys.stderr.write(f"{exc}\n")
        return INVALID
    except IterationCapExceeded as exc:
        sys.stderr.write(f"internal error: {exc}\n")
        return INTERNAL
    except Exception:  # anything else is a bug in this tool
        traceback.print_exc()
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
