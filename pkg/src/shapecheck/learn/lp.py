"""Sparse linear constraint systems and the HiGHS-backed solver entry points.

Problems are stated as::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                lower <= x <= upper

with rows kept as ``{variable: coefficient}`` maps until ``to_arrays`` builds the
``scipy.sparse`` matrices handed to ``scipy.optimize.linprog``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import optimize, sparse

from ..errors import SolverError, ValidationError

logger = logging.getLogger(__name__)

# Largest constraint violation accepted in a returned point, relative to the row scale.
FEAS_TOL = 1e-8
# Violations above FEAS_TOL * GROSS_FACTOR are solver failures rather than rounding.
GROSS_FACTOR = 100.0

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
    "presolve": True,
}


class Relation(str, Enum):
    LE = "<="
    EQ = "=="


@dataclass(frozen=True)
class Constraint:
    coefs: Mapping[int, float]
    relation: Relation
    rhs: float


class LinConstraintSystem:
    """Growable set of linear rows over ``num_vars`` variables with per-variable bounds.

    Variables default to free (``-inf``, ``+inf``).
    """

    def __init__(self, num_vars: int = 0):
        if num_vars < 0:
            raise ValidationError(f"num_vars must be nonnegative, got {num_vars}")
        self.constraints: list[Constraint] = []
        self._lower: list[float] = [-math.inf] * num_vars
        self._upper: list[float] = [math.inf] * num_vars

    @property
    def num_vars(self) -> int:
        return len(self._lower)

    def add_var(self, lower: float = -math.inf, upper: float = math.inf) -> int:
        self._lower.append(float(lower))
        self._upper.append(float(upper))
        return self.num_vars - 1

    def add_vars(self, count: int, lower: float = -math.inf, upper: float = math.inf) -> range:
        start = self.num_vars
        self._lower.extend([float(lower)] * count)
        self._upper.extend([float(upper)] * count)
        return range(start, self.num_vars)

    def set_bounds(self, var: int, lower: Optional[float] = None, upper: Optional[float] = None) -> None:
        self._check_var(var)
        if lower is not None:
            self._lower[var] = float(lower)
        if upper is not None:
            self._upper[var] = float(upper)

    def bounds(self, var: int) -> tuple[float, float]:
        self._check_var(var)
        return self._lower[var], self._upper[var]

    def _check_var(self, var: int) -> None:
        if not 0 <= var < self.num_vars:
            raise ValidationError(f"Variable {var} out of range [0, {self.num_vars})")

    def add(self, coefs: Mapping[int, float], relation: Relation, rhs: float) -> None:
        clean: dict[int, float] = {}
        for var, coef in coefs.items():
            self._check_var(int(var))
            if not math.isfinite(coef):
                raise ValidationError(f"Non-finite coefficient {coef} on variable {var}")
            if coef != 0.0:
                clean[int(var)] = clean.get(int(var), 0.0) + float(coef)
        if not math.isfinite(rhs):
            raise ValidationError(f"Non-finite right-hand side {rhs}")
        self.constraints.append(Constraint(clean, Relation(relation), float(rhs)))

    def le(self, coefs: Mapping[int, float], rhs: float) -> None:
        self.add(coefs, Relation.LE, rhs)

    def ge(self, coefs: Mapping[int, float], rhs: float) -> None:
        self.add({v: -c for v, c in coefs.items()}, Relation.LE, -rhs)

    def eq(self, coefs: Mapping[int, float], rhs: float) -> None:
        self.add(coefs, Relation.EQ, rhs)

    def to_arrays(self):
        """(A_ub, b_ub, A_eq, b_eq, bounds) with CSR matrices, or None for an empty block."""

        def block(rows: list[Constraint]):
            if not rows:
                return None, None
            data, ri, ci = [], [], []
            for r, row in enumerate(rows):
                for var, coef in row.coefs.items():
                    ri.append(r)
                    ci.append(var)
                    data.append(coef)
            mat = sparse.coo_matrix((data, (ri, ci)), shape=(len(rows), self.num_vars)).tocsr()
            return mat, np.array([row.rhs for row in rows])

        a_ub, b_ub = block([c for c in self.constraints if c.relation is Relation.LE])
        a_eq, b_eq = block([c for c in self.constraints if c.relation is Relation.EQ])
        bounds = np.column_stack([self._lower, self._upper]) if self.num_vars else np.zeros((0, 2))
        return a_ub, b_ub, a_eq, b_eq, bounds

    def max_violation(self, x: np.ndarray) -> float:
        """Largest row or bound violation of x, each scaled by 1 + |rhs| (or |bound|)."""
        a_ub, b_ub, a_eq, b_eq, bounds = self.to_arrays()
        worst = 0.0
        if a_ub is not None:
            worst = max(worst, float(np.max((a_ub @ x - b_ub) / (1.0 + np.abs(b_ub)), initial=0.0)))
        if a_eq is not None:
            worst = max(worst, float(np.max(np.abs(a_eq @ x - b_eq) / (1.0 + np.abs(b_eq)), initial=0.0)))
        lo, hi = bounds[:, 0], bounds[:, 1]
        with np.errstate(invalid="ignore"):
            below = np.where(np.isfinite(lo), (lo - x) / (1.0 + np.abs(lo)), 0.0)
            above = np.where(np.isfinite(hi), (x - hi) / (1.0 + np.abs(hi)), 0.0)
        return max(worst, float(np.max(below, initial=0.0)), float(np.max(above, initial=0.0)))

    def __repr__(self) -> str:
        return f"LinConstraintSystem(vars={self.num_vars}, rows={len(self.constraints)})"


@dataclass(frozen=True)
class Feasibility:
    """Answer of ``solve_feasibility``; ``point`` is None when infeasible."""

    feasible: bool
    point: Optional[np.ndarray] = None


@dataclass(frozen=True)
class LPSolution:
    feasible: bool
    point: Optional[np.ndarray] = None
    value: Optional[float] = None


def _solve(sys: LinConstraintSystem, objective: np.ndarray) -> LPSolution:
    if sys.num_vars == 0:
        raise ValidationError("Cannot solve a system without variables")
    a_ub, b_ub, a_eq, b_eq, bounds = sys.to_arrays()
    if np.any(bounds[:, 0] > bounds[:, 1]):
        return LPSolution(False)
    logger.debug("LP: %d vars, %d rows", sys.num_vars, len(sys.constraints))
    res = optimize.linprog(
        objective,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs-ds",
        options=_HIGHS_OPTIONS,
    )
    if res.status == 2:
        return LPSolution(False)
    if res.status != 0 or res.x is None:
        raise SolverError(f"LP solver failed (status {res.status}): {res.message}")
    x = np.asarray(res.x, dtype=float)
    violation = sys.max_violation(x)
    if violation > FEAS_TOL * GROSS_FACTOR:
        raise SolverError(f"LP solution violates its constraints by {violation:.3g}")
    if violation > FEAS_TOL:
        logger.warning("LP solution violates constraints by %.3g (tolerance %.0e)", violation, FEAS_TOL)
    return LPSolution(True, x, float(res.fun))


def solve_feasibility(sys: LinConstraintSystem) -> Feasibility:
    """Find any point satisfying the system, or report infeasibility.

    Raises:
        SolverError: If the backend fails or returns a point violating the rows grossly
    """
    sol = _solve(sys, np.zeros(sys.num_vars))
    return Feasibility(sol.feasible, sol.point)


def minimize(sys: LinConstraintSystem, objective: Sequence[float] | np.ndarray) -> LPSolution:
    """Minimize ``objective @ x`` over the system.

    Raises:
        ValidationError: If the objective length does not match the variables
        SolverError: If the backend fails or the problem is unbounded
    """
    c = np.asarray(objective, dtype=float)
    if c.shape != (sys.num_vars,):
        raise ValidationError(f"Objective has {c.size} entries for {sys.num_vars} variables")
    return _solve(sys, c)
