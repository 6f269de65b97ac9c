"""Distances between distributions."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..errors import DimensionMismatchError, ValidationError
from .models import Pmf


def _check_same_domain(p: Pmf, q: Pmf) -> None:
    if p.n != q.n:
        raise DimensionMismatchError(f"Domain sizes differ: {p.n} vs {q.n}")


def _subset_mask(n: int, subset) -> np.ndarray:
    if subset is None:
        return np.ones(n, dtype=bool)
    arr = np.asarray(subset)
    if arr.dtype == bool:
        if arr.size != n:
            raise DimensionMismatchError(f"Boolean subset has size {arr.size}, expected {n}")
        return arr.ravel()
    mask = np.zeros(n, dtype=bool)
    idx = arr.astype(np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValidationError("Subset indices out of range")
    mask[idx] = True
    return mask


def tv_distance(p: Pmf, q: Pmf) -> float:
    """Total variation distance, half the l1 distance."""
    _check_same_domain(p, q)
    return 0.5 * float(np.abs(p.mass - q.mass).sum())


def chi2_distance(p: Pmf, q: Pmf, subset=None) -> float:
    """Chi-squared distance sum((p_i - q_i)^2 / q_i) over ``subset`` (default: everything).

    The restricted version does not renormalize p or q.

    Raises:
        DimensionMismatchError: If the domains differ
        ValidationError: If q vanishes somewhere inside the subset
    """
    _check_same_domain(p, q)
    mask = _subset_mask(q.n, subset)
    qs = q.mass[mask]
    if np.any(qs <= 0):
        raise ValidationError("chi2_distance needs q_i > 0 on the subset")
    diff = p.mass[mask] - qs
    return float(np.sum(diff * diff / qs))


def kolmogorov_distance(p: Pmf, q: Pmf) -> float:
    """Largest gap between the two CDFs (flat order)."""
    _check_same_domain(p, q)
    return float(np.max(np.abs(np.cumsum(p.mass - q.mass))))


def chi2_tensor(axis_chi2: Sequence[float]) -> float:
    """Chi-squared distance of product pmfs from the per-axis distances: prod(1 + x) - 1."""
    values = np.asarray(list(axis_chi2), dtype=float)
    if np.any(values < 0):
        raise ValidationError("Per-axis chi-squared distances must be nonnegative")
    return float(np.prod(1.0 + values) - 1.0)


def subset_mask(n: int, subset: Optional[object]) -> np.ndarray:
    """Boolean mask for an index set given as indices, a mask, or None (everything)."""
    return _subset_mask(n, subset)
