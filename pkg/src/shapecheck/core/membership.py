"""Exact class-membership predicates."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatchError, ValidationError
from .models import ClassId, ClassKind, Pmf

# Slack on every defining inequality.
MEMBERSHIP_TOL = 1e-12
# Hazard rates are only compared where the tail mass 1 - F_i exceeds this.
TAIL_FLOOR = 1e-12


def tail_mass(f: np.ndarray) -> np.ndarray:
    """G_i = sum_{j > i} f_j, summed from the right so small tails stay accurate."""
    rev = np.cumsum(f[::-1])[::-1]
    return np.concatenate((rev[1:], [0.0]))


def is_monotone_grid(grid: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    """Non-increasing along every axis."""
    return all(np.all(np.diff(grid, axis=axis) <= tol) for axis in range(grid.ndim))


def is_unimodal_sequence(f: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    """Non-decreasing up to some index, non-increasing after it."""
    steps = np.diff(f)
    down = np.flatnonzero(steps < -tol)
    if down.size == 0:
        return True
    return not np.any(steps[down[0]:] > tol)


def is_log_concave_sequence(f: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    support = np.flatnonzero(f > 0)
    if support.size == 0:
        return False
    if support[-1] - support[0] + 1 != support.size:
        return False
    if f.size >= 3 and np.any(f[:-2] * f[2:] > f[1:-1] ** 2 + tol):
        return False
    return is_unimodal_sequence(f, tol)


def is_mhr_sequence(f: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    """Hazard f_i / (1 - F_i) non-decreasing wherever the tail is above TAIL_FLOOR.

    Compared in cross-multiplied form f_i G_{i+1} <= f_{i+1} G_i to avoid dividing by small tails.
    """
    g = tail_mass(f)
    live = g > TAIL_FLOOR
    pairs = live[:-1] & live[1:]
    lhs = f[:-1] * g[1:]
    rhs = f[1:] * g[:-1]
    return not np.any(pairs & (lhs > rhs + tol))


def is_product_grid(grid: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    """Rank-1 test: the grid equals the outer product of its marginals."""
    marginals = []
    for axis in range(grid.ndim):
        other = tuple(a for a in range(grid.ndim) if a != axis)
        marginals.append(grid.sum(axis=other))
    outer = marginals[0]
    for m in marginals[1:]:
        outer = np.multiply.outer(outer, m)
    return bool(np.all(np.abs(outer - grid) <= tol))


def is_member(cls: ClassId, p: Pmf) -> bool:
    """Whether ``p`` belongs to ``cls`` (tolerance MEMBERSHIP_TOL).

    Raises:
        ValidationError: If dims are missing for a multi-axis class
        DimensionMismatchError: If the class dims do not match p
    """
    kind = cls.kind
    if kind is ClassKind.MONOTONE:
        if cls.d == 1:
            return is_monotone_grid(p.mass)
        dims = cls.dims or p.dims
        if dims is None:
            raise ValidationError(f"Monotone({cls.d}) needs grid dims")
        if len(dims) != cls.d or int(np.prod(dims)) != p.n:
            raise DimensionMismatchError(f"dims {dims} do not fit Monotone({cls.d}) over n={p.n}")
        return is_monotone_grid(p.mass.reshape(dims))

    if kind is ClassKind.PRODUCT:
        dims = cls.dims
        if dims is None:
            raise ValidationError("Product needs grid dims")
        if int(np.prod(dims)) != p.n:
            raise DimensionMismatchError(f"dims {dims} do not cover n={p.n}")
        return is_product_grid(p.mass.reshape(dims))

    if kind is ClassKind.SINGLE_TARGET:
        return p.allclose(cls.target, atol=MEMBERSHIP_TOL)

    if p.d > 1:
        raise ValidationError(f"{kind.value} membership is defined for 1-d pmfs only")
    if kind is ClassKind.UNIMODAL:
        return is_unimodal_sequence(p.mass)
    if kind is ClassKind.LOG_CONCAVE:
        return is_log_concave_sequence(p.mass)
    if kind is ClassKind.MHR:
        return is_mhr_sequence(p.mass)
    raise ValidationError(f"Unknown class kind: {kind}")
