"""Constraint-reduced Mehrotra predictor-corrector for dense convex QPs.

>>> import numpy as np
>>> from crqp import Problem, solve
>>> p = Problem(H=[[2.0]], A=[[1.0]], b=[0.0], c=[-2.0], x0=[0.5])
>>> rep = solve(p)
>>> round(float(rep.x[0]), 6), rep.status.optimal
(1.0, True)
"""

from .generators import DataFitSpec, RandomSpec, gen_datafit, gen_random, make_problem
from .linalg import FactorizationError
from .model import (Problem, ProblemError, augment_equalities, augment_infeasible, error_metric,
                    row_normalize, validate)
from .problem_io import ResultRow, read_problem, write_csv, write_problem
from .rules import RuleConfig
from .solver import SolveOptions, SolveReport, Status, solve

__all__ = [
    "DataFitSpec", "FactorizationError", "Problem", "ProblemError", "RandomSpec", "ResultRow",
    "RuleConfig", "SolveOptions", "SolveReport", "Status", "augment_equalities",
    "augment_infeasible", "error_metric", "gen_datafit", "gen_random", "make_problem",
    "read_problem", "row_normalize", "solve", "validate", "write_csv", "write_problem",
]
