"""Total-variation distance from an explicit pmf to a shape class.

The LP distances work on cells: for q constant on each cell of a partition, the closest
monotone (or unimodal) pmf can be taken constant on the same cells, so one variable per
cell suffices.
"""

from __future__ import annotations

import itertools
import logging
import math
from typing import Optional

import numpy as np

from .core.distances import tv_distance
from .core.membership import is_member, is_unimodal_sequence
from .core.models import ClassId, ClassKind, Pmf
from .errors import DimensionMismatchError, ValidationError
from .learn.lp import LinConstraintSystem, minimize
from .partition import IntervalPartition, singleton_partition

logger = logging.getLogger(__name__)

# q must be constant on each cell up to this.
CELLWISE_TOL = 1e-9
BRUTE_FORCE_MAX_N = 8
# Classes without a chain structure are enumerated point by point up to this many lattice points.
ENUMERATION_LIMIT = 5_000_000


def _cell_values(q: Pmf, part: Optional[IntervalPartition]) -> tuple[IntervalPartition, np.ndarray, np.ndarray]:
    """Per-cell densities and sizes of q, checking that q is constant within cells."""
    if part is None:
        part = singleton_partition(q.shape)
    if part.n != q.n or (part.d > 1 and part.dims != q.shape):
        raise DimensionMismatchError(f"Partition over {part.dims} does not match pmf over {q.shape}")
    if not part.covers:
        raise ValidationError("Distance computations need a partition that covers the domain")
    sizes = part.sizes().astype(float)
    density = part.cell_masses(q) / sizes
    spread = np.abs(q.mass - density[part.labels()])
    if spread.size and spread.max() > CELLWISE_TOL:
        raise ValidationError(f"q is not constant on the partition cells (spread {spread.max():.3g})")
    return part, density, sizes


def _l1_projection(density: np.ndarray, sizes: np.ndarray, order: list[tuple[int, int]]) -> float:
    """min over f >= 0 with sum(sizes * f) = 1 and f[a] >= f[b] for (a, b) in order of
    half the weighted l1 distance sum(sizes * |f - density|)."""
    k = density.size
    sys = LinConstraintSystem()
    fv = sys.add_vars(k, 0.0)
    tv = sys.add_vars(k, 0.0)
    for i in range(k):
        sys.le({fv[i]: 1.0, tv[i]: -1.0}, float(density[i]))
        sys.le({fv[i]: -1.0, tv[i]: -1.0}, -float(density[i]))
    sys.eq({fv[i]: float(sizes[i]) for i in range(k)}, 1.0)
    for a, b in order:
        sys.le({fv[b]: 1.0, fv[a]: -1.0}, 0.0)
    objective = np.concatenate([np.zeros(k), 0.5 * sizes])
    sol = minimize(sys, objective)
    if not sol.feasible:
        # sum(sizes * f) = 1 with a flat f always satisfies the order rows
        raise ValidationError("Projection LP reported infeasible")
    return float(min(1.0, max(0.0, sol.value)))


def _grid_order(shape: tuple[int, ...]) -> list[tuple[int, int]]:
    order = []
    for j in range(int(np.prod(shape))):
        idx = np.unravel_index(j, shape)
        for axis in range(len(shape)):
            if idx[axis] + 1 < shape[axis]:
                nxt = list(idx)
                nxt[axis] += 1
                order.append((j, int(np.ravel_multi_index(nxt, shape))))
    return order


def dist_to_monotone(q: Pmf, part: Optional[IntervalPartition] = None) -> float:
    """TV distance from q to the non-increasing pmfs (along every axis for grids).

    Args:
        q: Pmf constant on each cell of ``part``
        part: Covering partition; singletons when omitted. Grid partitions must be rectangle products.

    Raises:
        ValidationError: If q is not cellwise-constant, the partition is unusable, or d > 3
    """
    part, density, sizes = _cell_values(q, part)
    if part.d == 1:
        order = [(i, i + 1) for i in range(len(part) - 1)]
    else:
        if part.d > 3:
            raise ValidationError(f"Grid monotone distance supports d <= 3, got d={part.d}")
        if part.shape is None:
            raise ValidationError("Grid monotone distance needs a rectangle-product partition")
        order = _grid_order(part.shape)
    dist = _l1_projection(density, sizes, order)
    logger.debug("dist_to_monotone over %d cells = %.6g", len(part), dist)
    return dist


def _isotonic_l1_prefix_costs(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """cost[k] = min sum_{i<=k} w_i |f_i - v_i| over non-decreasing f (weighted-median PAV)."""
    out = np.empty(values.size)
    blocks: list[tuple[np.ndarray, np.ndarray, float, float]] = []
    total = 0.0
    for k in range(values.size):
        vals = values[k:k + 1]
        wts = weights[k:k + 1]
        med = float(values[k])
        cost = 0.0
        while blocks and blocks[-1][2] > med:
            pv, pw, _, pc = blocks.pop()
            total -= pc
            vals = np.concatenate([pv, vals])
            wts = np.concatenate([pw, wts])
            order = np.argsort(vals, kind="stable")
            cum = np.cumsum(wts[order])
            med = float(vals[order][np.searchsorted(cum, 0.5 * cum[-1])])
            cost = float(np.sum(wts * np.abs(vals - med)))
        blocks.append((vals, wts, med, cost))
        total += cost
        out[k] = total
    return out


def dist_to_unimodal(q: Pmf, part: Optional[IntervalPartition] = None) -> float:
    """TV distance from a 1-d q to the unimodal pmfs.

    For each mode cell c the two-sided projection is one LP. Modes are visited in order of a
    lower bound built from l1 isotonic regression on the prefix and suffix, and skipped once the
    bound reaches the best value found, so the minimum is exact.
    """
    if q.d != 1:
        raise ValidationError("dist_to_unimodal is defined for 1-d pmfs")
    part, density, sizes = _cell_values(q, part)
    k = density.size
    if k <= 2 or is_unimodal_sequence(density):
        return 0.0

    # inc[i + 1]: cost of cells 0..i rising; dec[i]: cost of cells i..k-1 falling
    inc = np.concatenate([[0.0], _isotonic_l1_prefix_costs(density, sizes)])
    dec = np.concatenate([_isotonic_l1_prefix_costs(density[::-1], sizes[::-1])[::-1], [0.0]])
    c = np.arange(k)
    bounds = 0.5 * np.maximum(inc[c + 1] + dec[c + 1], inc[c] + dec[c])

    best = math.inf
    solved = 0
    for mode in np.argsort(bounds, kind="stable"):
        if bounds[mode] >= best - 1e-12:
            break
        order = [(i + 1, i) for i in range(mode)] + [(i, i + 1) for i in range(mode, k - 1)]
        best = min(best, _l1_projection(density, sizes, order))
        solved += 1
    logger.debug("dist_to_unimodal over %d cells: %d of %d mode LPs solved", k, solved, k)
    return float(best)


# ===== Exhaustive lattice oracle =====

def _terminal(K: int) -> np.ndarray:
    """Cost-to-go past the last position, indexed [previous value, remaining mass] in units of 1/K."""
    table = np.full((K + 1, K + 1), math.inf)
    table[:, 0] = 0.0
    return table


def _step(cost: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """U[k, R] = cost[k] + nxt[k, R - k] for R >= k, inf otherwise."""
    size = cost.size
    u = np.full((size, size), math.inf)
    for k in range(size):
        u[k, k:] = cost[k] + nxt[k, : size - k]
    return u


def _lattice_monotone(q: np.ndarray, K: int) -> float:
    grid = np.arange(K + 1) / K
    table = _terminal(K)
    for qi in q[::-1]:
        u = _step(np.abs(grid - qi), table)
        table = np.minimum.accumulate(u, axis=0)  # previous value p allows any k <= p
    return 0.5 * float(table[K, K])


def _lattice_unimodal(q: np.ndarray, K: int) -> float:
    grid = np.arange(K + 1) / K
    falling = _terminal(K)
    rising = falling.copy()
    for qi in q[::-1]:
        cost = np.abs(grid - qi)
        u_fall = _step(cost, falling)
        u_rise = _step(cost, rising)
        falling = np.minimum.accumulate(u_fall, axis=0)
        keep_rising = np.minimum.accumulate(u_rise[::-1], axis=0)[::-1]  # k >= p
        rising = np.minimum(keep_rising, falling)
    return 0.5 * float(rising[0, K])


def _lattice_enumerate(cls: ClassId, q: Pmf, K: int) -> float:
    n = q.n
    if math.comb(K + n - 1, n - 1) > ENUMERATION_LIMIT:
        raise ValidationError(
            f"Lattice with step 1/{K} over n={n} is too large to enumerate for {cls.label}; use a coarser step"
        )
    best = math.inf
    target = q.mass
    for cuts in itertools.combinations(range(K + n - 1), n - 1):
        bounds = (-1,) + cuts + (K + n - 1,)
        f = np.diff(bounds) - 1
        dist = 0.5 * float(np.abs(f / K - target).sum())
        if dist < best and is_member(cls, Pmf(f / K, dims=q.dims)):
            best = dist
    return best


def brute_force_dist(cls: ClassId, q: Pmf, step: float = 1e-3) -> float:
    """Smallest TV distance from q to a member of cls on the lattice of multiples of ``step``.

    Monotone(1) and unimodal use an exact dynamic program over (position, previous value,
    remaining mass); other classes enumerate the lattice and filter with is_member. The result
    upper-bounds the true distance by about n * step.

    Raises:
        ValidationError: If q.n > 8, the step is out of range, or the lattice is too large to enumerate
    """
    if q.n > BRUTE_FORCE_MAX_N:
        raise ValidationError(f"brute_force_dist supports n <= {BRUTE_FORCE_MAX_N}, got {q.n}")
    if not 1e-3 - 1e-15 <= step <= 1.0:
        raise ValidationError(f"step must lie in [1e-3, 1], got {step}")
    if cls.kind is ClassKind.SINGLE_TARGET:
        return tv_distance(q, cls.target)
    K = int(round(1.0 / step))
    if cls.kind is ClassKind.MONOTONE and cls.d == 1:
        return _lattice_monotone(q.mass, K)
    if cls.kind is ClassKind.UNIMODAL:
        if q.d != 1:
            raise ValidationError("Unimodal is defined for 1-d pmfs")
        return _lattice_unimodal(q.mass, K)
    return _lattice_enumerate(cls, q, K)


def dist_to_class(cls: ClassId, q: Pmf, part: Optional[IntervalPartition] = None) -> float:
    """Dispatch for the classes with an exact distance computation."""
    if cls.kind is ClassKind.MONOTONE:
        if cls.d > 1 and part is None:
            part = singleton_partition(q.shape)
        return dist_to_monotone(q, part)
    if cls.kind is ClassKind.UNIMODAL:
        return dist_to_unimodal(q, part)
    if cls.kind is ClassKind.SINGLE_TARGET:
        return tv_distance(q, cls.target)
    raise ValidationError(f"No exact distance computation for {cls.label}; use brute_force_dist on small domains")
