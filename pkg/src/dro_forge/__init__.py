"""Primal column-generation solvers for two-stage distributionally robust optimization."""

from .lp import LE, EQ, GE, MAX, MIN, LpProblem, LpSolution, LpStatus, LpTolerances, solve_lp

__version__ = "0.1.0"
