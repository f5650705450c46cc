"""Parse, symbolically execute and certify dGL formalizations of kinematics problems."""

from .checker import CheckSpec, CheckVerdict, check
from .ir import free_vars, substitute, written_vars
from .parser import DglSyntaxError, check_syntax, parse_formula, print_formula
from .symexec import ToolFailure, expand, solve_ode, wp

__version__ = "0.1.0"

__all__ = [
    "CheckSpec", "CheckVerdict", "DglSyntaxError", "ToolFailure", "check", "check_syntax",
    "expand", "free_vars", "parse_formula", "print_formula", "solve_ode", "substitute",
    "wp", "written_vars",
]
