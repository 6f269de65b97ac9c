"""Proper learner for monotone hazard rate (MHR) distributions.

A pmf f is MHR exactly when g_k = log(1 - F_k) is concave in k, with g_{-1} = 0. The LP
runs over g_{-1..n-2}; G_{n-1} = 0 is structural, so the last element gets whatever mass is
left. Bands:

* heavy elements (empirical mass >= 1/b): g at both ends of the element stays within a
  relative band of the empirical tail, widened to the DKW radius where the sample cannot
  resolve eps/(2b);
* other cells: the drop g_{lo-1} - g_hi stays within -log(1 - x(1 +- beta)) where
  x = q(cell) / (1 - Q_{lo-1}) is the empirical conditional mass of the cell.

The objective pulls every knot towards a smooth g built from the isotonic fit of the empirical
hazard; the correction the LP makes is interpolated between knots before taking the least
concave majorant. Cells next to a neighbour of very different density, and the eps-tails at
both ends, are left unbanded and excluded from the returned support.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.isotonic import isotonic_regression

from ..core.membership import tail_mass
from ..core.models import Pmf, SampleCounts
from ..errors import SampleBudgetError, ValidationError
from ..partition import greedy_mass_cells
from ..sampling import dkw_radius
from .lp import LinConstraintSystem, minimize
from .models import LearnOutcome, concave_majorant

logger = logging.getLogger(__name__)

LOG_FLOOR = -700.0
ZERO_WEIGHT = 1e-9


@dataclass
class _Cell:
    lo: int
    hi: int
    mass: float
    kind: str  # "tail", "heavy", "light" or "pruned"

    @property
    def density(self) -> float:
        return self.mass / (self.hi - self.lo + 1)


def mhr_min_samples(n: int, eps: float, constant: float) -> int:
    return math.floor(constant * math.log(n / eps) / eps**4)


def mhr_cell_budget(n: int, eps: float, constant: float) -> int:
    return max(1, math.ceil(constant * math.log(n / eps) / eps**2))


def _smooth_log_tail(counts: np.ndarray) -> np.ndarray:
    """g_{-1..n-2} from the weighted isotonic (non-decreasing) fit of the empirical hazard."""
    n = counts.size
    at_risk = np.cumsum(counts[::-1])[::-1].astype(float)
    last = int(np.flatnonzero(counts)[-1])
    hazard = np.ones(n)
    hazard[: last + 1] = isotonic_regression(
        counts[: last + 1] / at_risk[: last + 1], sample_weight=at_risk[: last + 1].copy(), increasing=True
    )
    hazard[last] = 1.0
    with np.errstate(divide="ignore"):
        steps = np.log1p(-np.minimum(hazard[:-1], 1.0))
    return np.maximum(np.concatenate([[0.0], np.cumsum(steps)]), LOG_FLOOR)


def _prune(cells: list[_Cell], eps: float) -> None:
    """Mark light cells whose density is outside (1 +- eps) of a neighbouring cell's."""
    lo, hi = 1.0 - eps, 1.0 + eps
    flagged = []
    for idx, cell in enumerate(cells):
        if cell.kind != "light":
            continue
        for nb in (idx - 1, idx + 1):
            if not 0 <= nb < len(cells) or cells[nb].kind == "tail":
                continue
            other = cells[nb].density
            if other <= 0 or not lo <= cell.density / other <= hi:
                flagged.append(idx)
                break
    for idx in flagged:
        cells[idx].kind = "pruned"


def mhr_learn(
    samples: SampleCounts,
    eps: float,
    *,
    sample_constant: float = 16.0,
    b_constant: float = 1.0,
    tail_constant: float = 0.25,
    band_constant: float = 2.0,
    delta: float = 0.05,
) -> LearnOutcome:
    """Learn an MHR q and the index set S it is accurate on, or reject.

    Args:
        samples: Counts of a 1-d sample of at least ``sample_constant * ln(n/eps) / eps^4``
        eps: Accuracy parameter in (0, 1)
        sample_constant: Minimum-budget constant
        b_constant: Cells hold about 1/b mass with ``b = ceil(b_constant * ln(n/eps) / eps^2)``
        tail_constant: Mass ``tail_constant * eps`` at each end is left unbanded
        band_constant: Relative half-width of the light-cell bands, in units of eps
        delta: Failure probability for the DKW widening of the heavy-element bands

    Raises:
        ValidationError: If the sample is not 1-d or eps is out of range
        SampleBudgetError: If the sample is below the minimum budget
    """
    if samples.dims is not None and len(samples.dims) > 1:
        raise ValidationError("mhr_learn works on 1-d samples")
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    n = samples.n
    need = mhr_min_samples(n, eps, sample_constant)
    if samples.m_nominal < need:
        raise SampleBudgetError(f"mhr_learn needs at least {need} samples at n={n}, eps={eps}, got {samples.m_nominal}")
    m = samples.m_actual
    if m == 0:
        return LearnOutcome.reject("empty sample")
    if n == 1:
        return LearnOutcome.accept(Pmf([1.0]), [0])

    p_hat = samples.counts / m
    g_hat = tail_mass(p_hat)
    cdf = np.cumsum(p_hat)
    b = mhr_cell_budget(n, eps, b_constant)
    t = tail_constant * eps
    start = int(np.searchsorted(cdf, t, side="right"))
    stop = int(np.argmax(g_hat <= t)) + 1
    start = min(start, stop)

    cells: list[_Cell] = []
    if start > 0:
        cells.append(_Cell(0, start - 1, float(p_hat[:start].sum()), "tail"))
    for lo, hi in greedy_mass_cells(p_hat, b, start, stop):
        mass = float(p_hat[lo:hi + 1].sum())
        cells.append(_Cell(lo, hi, mass, "heavy" if lo == hi and mass >= 1.0 / b else "light"))
    if stop < n:
        cells.append(_Cell(stop, n - 1, float(p_hat[stop:].sum()), "tail"))
    _prune(cells, eps)

    # Knot k stands for g_k; knot -1 is pinned to 0.
    knots = [-1] + [c.hi for c in cells if c.hi <= n - 2]
    if knots[-1] != n - 2:
        knots.append(n - 2)
    sys = LinConstraintSystem()
    gv = dict(zip(knots, sys.add_vars(len(knots), LOG_FLOOR, 0.0)))
    sys.set_bounds(gv[-1], 0.0, 0.0)

    radius = dkw_radius(m, delta)
    for cell in cells:
        if cell.kind == "heavy":
            for k in (cell.lo - 1, cell.hi):
                if k < 0 or k > n - 2 or g_hat[k] <= 0:
                    continue
                w = max(eps / (2.0 * b), radius / g_hat[k])
                lower, upper = sys.bounds(gv[k])
                if w < 1:
                    lower = max(lower, math.log(g_hat[k]) + math.log1p(-w))
                upper = min(upper, math.log(g_hat[k]) + math.log1p(w))
                sys.set_bounds(gv[k], lower, upper)
        elif cell.kind == "light" and cell.hi <= n - 2:
            before = 1.0 if cell.lo == 0 else float(g_hat[cell.lo - 1])
            if before <= 0:
                continue
            x = cell.mass / before
            beta = band_constant * eps
            drop = {gv[cell.lo - 1]: 1.0, gv[cell.hi]: -1.0}
            if beta < 1:
                sys.ge(drop, -math.log1p(-x * (1.0 - beta)))
            if x * (1.0 + beta) < 1:
                sys.le(drop, -math.log1p(-x * (1.0 + beta)))

    for a, c, e in zip(knots, knots[1:], knots[2:]):
        left = 1.0 / (c - a)
        right = 1.0 / (e - c)
        sys.le({gv[a]: left, gv[c]: -(left + right), gv[e]: right}, 0.0)
    for a, c in zip(knots, knots[1:]):
        sys.ge({gv[a]: 1.0, gv[c]: -1.0}, 0.0)

    # smooth[k + 1] is the fitted g_k
    smooth = _smooth_log_tail(samples.counts)
    weight = {c.hi: c.mass for c in cells}
    cost: dict[int, float] = {}
    for k in knots[1:]:
        target = float(smooth[k + 1])
        aux = sys.add_var(0.0)
        sys.le({gv[k]: 1.0, aux: -1.0}, target)
        sys.le({gv[k]: -1.0, aux: -1.0}, -target)
        cost[aux] = max(weight.get(k, 0.0), ZERO_WEIGHT)
    objective = np.zeros(sys.num_vars)
    for v, w in cost.items():
        objective[v] = w

    sol = minimize(sys, objective)
    counts_by_kind = {kind: sum(1 for c in cells if c.kind == kind) for kind in ("heavy", "light", "pruned", "tail")}
    if not sol.feasible:
        logger.info("MHR learner rejected: LP infeasible (%s)", counts_by_kind)
        return LearnOutcome.reject("LP infeasible", b=b, cells=counts_by_kind)

    grid = np.arange(-1, n - 1, dtype=float)
    correction = sol.point[: len(knots)] - smooth[np.asarray(knots) + 1]
    g = np.minimum(smooth + np.interp(grid, knots, correction), 0.0)
    g = concave_majorant(g, grid)
    tail = np.append(np.exp(g), 0.0)
    f = np.clip(tail[:-1] - tail[1:], 0.0, None)
    banded = [c for c in cells if c.kind == "heavy" or (c.kind == "light" and c.hi <= n - 2)]
    support = np.concatenate([np.arange(c.lo, c.hi + 1) for c in banded] or [np.zeros(0, np.int64)])
    logger.info("MHR fit over %d cells (b=%d), |S|=%d", len(cells), b, support.size)
    return LearnOutcome.accept(Pmf.from_weights(f), support, b=b, cells=counts_by_kind)
