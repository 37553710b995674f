"""Linear and mixed-binary optimization: model IR, simplex, branch-and-bound."""

from .expr import AffExpr, as_expr, concatenate, hstack, value_of, vstack
from .lpfile import export_lp_file, model_terms, read_lp, write_lp
from .model import (EQ, GE, LE, Compiled, Constraints, NumericalFailure, OptModel, Solution,
                    SolverError, SolverOptions, Status)
from .solve import kkt_report, solve, solve_lp, solve_milp

__all__ = [
    "AffExpr", "as_expr", "concatenate", "hstack", "vstack", "value_of",
    "export_lp_file", "write_lp", "read_lp", "model_terms",
    "EQ", "GE", "LE", "Compiled", "Constraints", "NumericalFailure", "OptModel",
    "Solution", "SolverError", "SolverOptions", "Status",
    "kkt_report", "solve", "solve_lp", "solve_milp",
]
