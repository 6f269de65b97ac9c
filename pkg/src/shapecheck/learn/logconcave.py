"""Proper learner for discrete log-concave distributions.

A weighted least-squares concave fit of the binned empirical log-masses gives the shape of
log q. An LP over the values of Q = log q at interval endpoints then moves that fit as little
as possible (weighted l1) into the bands:

* elements are grouped into intervals of empirical mass at most 9 eps^1.5 / 10, counted
  inwards from either end of the domain, and interval j (j >= 1/sqrt(eps)) confines Q to
  log(1 +- c/j) around the log of its flattened empirical mass;
* elements of empirical mass at least eps^1.5 / 5 are banded individually by log(1 +- eps).

The correction is interpolated linearly between knots and the result replaced by its least
concave majorant. Without heavy elements the ceil(1/eps) intervals nearest the densest one
are tried in turn as the one holding the mode, left unbanded between the two sides. S is the
union of banded intervals, so it misses at most 2 (ceil(1/sqrt(eps)) - 1) + 1 intervals and
p_hat(S) >= 1 - 9 eps / 5 - 9 eps^1.5 / 10.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.models import Pmf, SampleCounts
from ..errors import SampleBudgetError, ValidationError
from .lp import LinConstraintSystem, minimize
from .models import LearnOutcome, concave_fit, concave_majorant

logger = logging.getLogger(__name__)

# Q never goes below this, so exp(Q) stays a positive double.
LOG_FLOOR = -700.0
# Objective pull on knots of intervals with no samples.
ZERO_WEIGHT = 1e-9
# The smooth fit bins the domain so each bin holds about this many samples.
BIN_SAMPLES = 16
MAX_BINS = 256


@dataclass
class _Segment:
    lo: int
    hi: int
    mass: float
    lower: float = LOG_FLOOR
    upper: float = 0.0
    banded: bool = False

    @property
    def target(self) -> Optional[float]:
        return math.log(self.mass / (self.hi - self.lo + 1)) if self.mass > 0 else None


def lcd_min_samples(eps: float, constant: float) -> int:
    return math.floor(constant / eps**5)


def _intervals(mass: np.ndarray, start: int, stop: int, cap: float, from_right: bool = False) -> list[tuple[int, int]]:
    """Greedy runs of mass <= cap over [start, stop), listed from the outer edge inwards."""
    out: list[tuple[int, int]] = []
    order = range(stop - 1, start - 1, -1) if from_right else range(start, stop)
    first: Optional[int] = None
    last = 0
    run = 0.0
    for i in order:
        if first is not None and run + mass[i] > cap:
            out.append((min(first, last), max(first, last)))
            first, run = None, 0.0
        if first is None:
            first = i
        last = i
        run += float(mass[i])
    if first is not None:
        out.append((min(first, last), max(first, last)))
    return out


def _banded(lo: int, hi: int, mass: np.ndarray, j: int, j_min: float, band_constant: float) -> _Segment:
    seg = _Segment(lo, hi, float(mass[lo:hi + 1].sum()))
    target = seg.target
    if j < j_min or target is None:
        return seg
    r = band_constant / j
    seg.upper = min(0.0, target + math.log1p(r))
    seg.lower = max(LOG_FLOOR, target + math.log1p(-r)) if r < 1 else LOG_FLOOR
    seg.banded = True
    return seg


def _heavy(i: int, mass: np.ndarray, eps: float) -> _Segment:
    seg = _Segment(i, i, float(mass[i]), banded=True)
    target = math.log(seg.mass)
    seg.upper = min(0.0, target + math.log1p(eps))
    seg.lower = max(LOG_FLOOR, target + math.log1p(-eps)) if eps < 1 else LOG_FLOOR
    return seg


def _smooth_log_mass(counts: np.ndarray, m: int) -> np.ndarray:
    """Concave least-squares fit of log(counts / m) over bins, evaluated at every element."""
    n = counts.size
    bins = max(1, min(n, MAX_BINS, m // BIN_SAMPLES))
    edges = np.rint(np.linspace(0, n, bins + 1)).astype(np.int64)
    lo, hi = edges[:-1], edges[1:]
    hits = np.add.reduceat(counts, lo).astype(float)
    live = hits > 0
    y = np.zeros(bins)
    # log(N + 1/2) has no first-order bias for a Poisson count N
    y[live] = np.log((hits[live] + 0.5) / (m * (hi - lo)[live]))
    centers = (lo + hi - 1) / 2.0
    smooth = concave_fit(y, hits, x=centers, at=np.arange(n, dtype=float))
    return np.clip(smooth, LOG_FLOOR, 0.0)


def _fit(segments: list[_Segment], smooth: np.ndarray) -> Optional[np.ndarray]:
    """Move ``smooth`` into the bands with a concave correction; None if the LP is infeasible."""
    knots: list[int] = []
    owner: list[_Segment] = []
    for seg in segments:
        for k in sorted({seg.lo, seg.hi}):
            knots.append(k)
            owner.append(seg)

    sys = LinConstraintSystem()
    qv = sys.add_vars(len(knots), LOG_FLOOR, 0.0)
    for v, seg in zip(qv, owner):
        sys.set_bounds(v, seg.lower, seg.upper)

    for a, b, c in zip(range(len(knots)), range(1, len(knots)), range(2, len(knots))):
        left = 1.0 / (knots[b] - knots[a])
        right = 1.0 / (knots[c] - knots[b])
        sys.le({qv[a]: left, qv[b]: -(left + right), qv[c]: right}, 0.0)

    cost: dict[int, float] = {}
    for v, k, seg in zip(qv, knots, owner):
        share = 1.0 if seg.lo == seg.hi else 0.5
        target = float(smooth[k])
        t = sys.add_var(0.0)
        sys.le({v: 1.0, t: -1.0}, target)
        sys.le({v: -1.0, t: -1.0}, -target)
        cost[t] = max(seg.mass * share, ZERO_WEIGHT)

    objective = np.zeros(sys.num_vars)
    for v, w in cost.items():
        objective[v] = w
    sol = minimize(sys, objective)
    if not sol.feasible:
        return None
    correction = sol.point[: len(knots)] - smooth[knots]
    return smooth + np.interp(np.arange(smooth.size), knots, correction)


def lcd_learn(
    samples: SampleCounts,
    eps: float,
    *,
    sample_constant: float = 124.0,
    band_constant: float = 22.0 / 3.0,
    normalization_slack: float = 1.0,
) -> LearnOutcome:
    """Learn a log-concave q and the index set S it is accurate on, or reject.

    Args:
        samples: Counts of a 1-d sample of at least ``sample_constant / eps^5``
        eps: Accuracy parameter in (0, 1]
        sample_constant: Minimum budget is ``floor(sample_constant / eps^5)``
        band_constant: Interval j is banded by ``log(1 +- band_constant / j)``
        normalization_slack: Reject when ``|log Z| > normalization_slack * eps``

    Returns:
        LearnOutcome with q log-concave, or a rejection when no LP is feasible

    Raises:
        ValidationError: If the sample is not 1-d or eps is out of range
        SampleBudgetError: If the sample is below the minimum budget
    """
    if samples.dims is not None and len(samples.dims) > 1:
        raise ValidationError("lcd_learn works on 1-d samples")
    if not 0 < eps <= 1:
        raise ValidationError(f"eps must lie in (0, 1], got {eps}")
    need = lcd_min_samples(eps, sample_constant)
    if samples.m_nominal < need:
        raise SampleBudgetError(f"lcd_learn needs at least {need} samples at eps={eps}, got {samples.m_nominal}")
    m = samples.m_actual
    if m == 0:
        return LearnOutcome.reject("empty sample")

    n = samples.n
    p_hat = samples.counts / m
    cap = 0.9 * eps**1.5
    j_min = 1.0 / math.sqrt(eps)
    heavy = np.flatnonzero(p_hat >= eps**1.5 / 5.0)

    smooth = _smooth_log_mass(samples.counts, m)

    candidates: list[tuple[str, list[_Segment]]] = []
    if heavy.size:
        mlo, mhi = int(heavy[0]), int(heavy[-1])
        if np.any(p_hat[mlo:mhi + 1] == 0):
            return LearnOutcome.reject("unsampled element between heavy elements")
        left = _intervals(p_hat, 0, mlo, cap)
        right = _intervals(p_hat, mhi + 1, n, cap, from_right=True)
        segments = [_banded(lo, hi, p_hat, j + 1, j_min, band_constant) for j, (lo, hi) in enumerate(left)]
        segments += [_heavy(i, p_hat, eps) for i in range(mlo, mhi + 1)]
        segments += [
            _banded(lo, hi, p_hat, j + 1, j_min, band_constant) for j, (lo, hi) in reversed(list(enumerate(right)))
        ]
        candidates.append((f"heavy[{mlo},{mhi}]", segments))
    else:
        intervals = _intervals(p_hat, 0, n, cap)
        k = len(intervals)
        density = [p_hat[lo:hi + 1].sum() / (hi - lo + 1) for lo, hi in intervals]
        peak = int(np.argmax(density))
        guesses = sorted(range(k), key=lambda i: (abs(i - peak), i))[: math.ceil(1.0 / eps)]
        for s in guesses:
            segments = []
            for idx, (lo, hi) in enumerate(intervals):
                if idx < s:
                    segments.append(_banded(lo, hi, p_hat, idx + 1, j_min, band_constant))
                elif idx == s:
                    segments.append(_Segment(lo, hi, float(p_hat[lo:hi + 1].sum())))
                else:
                    segments.append(_banded(lo, hi, p_hat, k - idx, j_min, band_constant))
            candidates.append((f"mode[{intervals[s][0]},{intervals[s][1]}]", segments))

    for tries, (label, segments) in enumerate(candidates, start=1):
        q_log = _fit(segments, smooth)
        if q_log is None:
            logger.debug("log-concave LP infeasible for %s", label)
            continue
        q_log = concave_majorant(q_log)
        f = np.exp(q_log)
        z = float(f.sum())
        if abs(math.log(z)) > normalization_slack * eps:
            logger.info("log-concave fit rejected: normalization %.4g outside exp(+-%.3g)", z, normalization_slack * eps)
            return LearnOutcome.reject("normalization outside band", lp_solves=tries, normalization=z)
        support = np.concatenate([np.arange(s.lo, s.hi + 1) for s in segments if s.banded] or [np.zeros(0, np.int64)])
        logger.info("log-concave fit with %s after %d LPs, |S|=%d", label, tries, support.size)
        return LearnOutcome.accept(Pmf(f / z), support, lp_solves=tries, region=label, normalization=z)

    logger.info("log-concave learner rejected: %d LPs infeasible", len(candidates))
    return LearnOutcome.reject("every LP infeasible", lp_solves=len(candidates))
