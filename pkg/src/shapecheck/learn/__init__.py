"""Learners and the linear-programming layer they share."""

from .lp import Feasibility, LinConstraintSystem, LPSolution, Relation, minimize, solve_feasibility
from .models import LearnOutcome, concave_fit, concave_majorant
from .laplace import add1_learn, monotone_learn, product_learn
from .logconcave import lcd_learn, lcd_min_samples
from .hazard import mhr_cell_budget, mhr_learn, mhr_min_samples

__all__ = [
    "LinConstraintSystem",
    "Relation",
    "Feasibility",
    "LPSolution",
    "solve_feasibility",
    "minimize",
    "LearnOutcome",
    "concave_fit",
    "concave_majorant",
    "add1_learn",
    "product_learn",
    "monotone_learn",
    "lcd_learn",
    "lcd_min_samples",
    "mhr_learn",
    "mhr_min_samples",
    "mhr_cell_budget",
]
