"""Parser, type checker, concrete interpreter and abstract interpreter for CPM,
a small imperative language with integers, Booleans, exceptions, blocks and
recursive functions."""

from .analyzer import AnalysisConfig, IterationCapExceeded, Report, analyze_program
from .interp import BudgetExhausted, Completed, ProgramResult, run_program
from .parser import ParseError, parse
from .statics import CpmTypeError, ValidityError, check_program

__all__ = [
    "AnalysisConfig", "BudgetExhausted", "Completed", "CpmTypeError", "IterationCapExceeded",
    "ParseError", "ProgramResult", "Report", "ValidityError", "analyze_program", "check_program",
    "parse", "run_program",
]
