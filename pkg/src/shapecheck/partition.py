"""Domain decompositions: oblivious Birgé intervals, rectangle grids and sample-adaptive cells.

Cells are inclusive per-axis index ranges. A 1-d partition stores ``((lo, hi),)`` per cell;
a grid partition stores one ``(lo, hi)`` pair per axis and, when it is a rectangle product,
the per-axis cell counts in ``shape`` so cell ``j`` sits at ``np.unravel_index(j, shape)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .core.models import Pmf, SampleCounts
from .errors import DimensionMismatchError, ValidationError

logger = logging.getLogger(__name__)

Range = tuple[int, int]
Cell = tuple[Range, ...]


@dataclass(frozen=True, eq=False)
class IntervalPartition:
    """Disjoint cells over a 1-d domain or a row-major grid."""

    cells: tuple[Cell, ...]
    dims: tuple[int, ...]
    shape: Optional[tuple[int, ...]] = None  # per-axis cell counts of a rectangle product

    def __post_init__(self):
        dims = tuple(int(x) for x in self.dims)
        if not dims or any(x < 1 for x in dims):
            raise ValidationError(f"Partition dims must be positive, got {dims}")
        cells = tuple(tuple((int(lo), int(hi)) for lo, hi in cell) for cell in self.cells)
        if not cells:
            raise ValidationError("A partition needs at least one cell")
        for cell in cells:
            if len(cell) != len(dims):
                raise DimensionMismatchError(f"Cell {cell} does not match {len(dims)} axes")
            for (lo, hi), size in zip(cell, dims):
                if not 0 <= lo <= hi < size:
                    raise ValidationError(f"Cell range ({lo}, {hi}) outside [0, {size})")
        if len(dims) == 1:
            for prev, cur in zip(cells, cells[1:]):
                if cur[0][0] <= prev[0][1]:
                    raise ValidationError("1-d cells must be disjoint and ordered left to right")
        shape = tuple(int(x) for x in self.shape) if self.shape is not None else None
        if shape is not None and int(np.prod(shape)) != len(cells):
            raise ValidationError(f"Cell shape {shape} does not match {len(cells)} cells")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "shape", shape)
        if len(dims) > 1:
            hits = np.zeros(dims, dtype=np.int64)
            for cell in cells:
                hits[self._slices(cell)] += 1
            if np.any(hits > 1):
                raise ValidationError("Grid cells overlap")

    @staticmethod
    def _slices(cell: Cell) -> tuple[slice, ...]:
        return tuple(slice(lo, hi + 1) for lo, hi in cell)

    @classmethod
    def from_intervals(cls, n: int, intervals: Sequence[Range]) -> "IntervalPartition":
        return cls(tuple(((lo, hi),) for lo, hi in intervals), (n,))

    @property
    def n(self) -> int:
        return int(np.prod(self.dims))

    @property
    def d(self) -> int:
        return len(self.dims)

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def intervals(self) -> list[Range]:
        """The (lo, hi) ranges of a 1-d partition."""
        if self.d != 1:
            raise ValidationError("intervals is only defined for 1-d partitions")
        return [cell[0] for cell in self.cells]

    @cached_property
    def _labels(self) -> np.ndarray:
        lab = np.full(self.dims, -1, dtype=np.int64)
        for j, cell in enumerate(self.cells):
            lab[self._slices(cell)] = j
        lab = lab.ravel()
        lab.setflags(write=False)
        return lab

    def labels(self) -> np.ndarray:
        """Cell id of every flat index, -1 where no cell covers it."""
        return self._labels

    def sizes(self) -> np.ndarray:
        return np.array([math.prod(hi - lo + 1 for lo, hi in cell) for cell in self.cells], dtype=np.int64)

    @property
    def covers(self) -> bool:
        return bool(np.all(self._labels >= 0))

    def is_singletons(self) -> np.ndarray:
        return self.sizes() == 1

    def cell_masses(self, values: Union[Pmf, SampleCounts, np.ndarray]) -> np.ndarray:
        """Per-cell sums of a pmf, a count vector or any flat array."""
        if isinstance(values, Pmf):
            arr = values.mass
        elif isinstance(values, SampleCounts):
            arr = values.counts
        else:
            arr = np.asarray(values).ravel()
        if arr.size != self.n:
            raise DimensionMismatchError(f"Values have {arr.size} entries, partition covers {self.n}")
        lab = self._labels
        inside = lab >= 0
        return np.bincount(lab[inside], weights=arr[inside].astype(float), minlength=len(self.cells))

    def to_dict(self) -> dict:
        if self.d == 1:
            cells = [list(cell[0]) for cell in self.cells]
        else:
            cells = [[list(r) for r in cell] for cell in self.cells]
        data = {"dims": list(self.dims), "cells": cells}
        if self.shape is not None:
            data["shape"] = list(self.shape)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "IntervalPartition":
        try:
            dims = tuple(data["dims"])
            raw = data["cells"]
        except (KeyError, TypeError):
            raise ValidationError("Partition JSON needs 'dims' and 'cells'")
        if len(dims) == 1:
            cells = tuple((tuple(c),) for c in raw)
        else:
            cells = tuple(tuple(tuple(r) for r in c) for c in raw)
        return cls(cells, dims, data.get("shape"))

    def __repr__(self) -> str:
        return f"IntervalPartition(cells={len(self.cells)}, dims={self.dims})"


# ===== Oblivious partitions =====

def _product(axis_intervals: Sequence[list[Range]], dims: tuple[int, ...]) -> IntervalPartition:
    cells = tuple(itertools.product(*axis_intervals))
    return IntervalPartition(cells, dims, tuple(len(a) for a in axis_intervals))


def singleton_partition(dims: Union[int, Sequence[int]]) -> IntervalPartition:
    dims = (int(dims),) if isinstance(dims, (int, np.integer)) else tuple(int(x) for x in dims)
    if len(dims) == 1:
        return IntervalPartition.from_intervals(dims[0], [(i, i) for i in range(dims[0])])
    return _product([[(i, i) for i in range(size)] for size in dims], dims)


def birge_lengths(n: int, b: int, gamma: float) -> list[int]:
    """Interval lengths: 1 for j <= b/2, then floor(2(1+gamma)^(j - b/2)), fitted to sum to n."""
    lengths: list[int] = []
    total = 0
    j = 0
    while total < n:
        j += 1
        length = 1 if j <= b // 2 else max(1, math.floor(2.0 * (1.0 + gamma) ** (j - b // 2)))
        lengths.append(length)
        total += length
    lengths[-1] -= total - n
    return lengths


def _birge_intervals(n: int, gamma: float) -> list[Range]:
    if n == 1:
        return [(0, 0)]
    b = max(2, math.ceil(2.0 * math.log(n) / gamma))
    b += b % 2
    actual = 2.0 * math.log(n) / b
    lengths = birge_lengths(n, b, actual)
    logger.debug("birge n=%d gamma=%.4g -> b=%d, %d cells", n, gamma, b, len(lengths))
    out = []
    lo = 0
    for length in lengths:
        out.append((lo, lo + length - 1))
        lo += length
    return out


def birge_partition(n: int, gamma: float) -> IntervalPartition:
    """Oblivious decomposition of [n] whose flattening keeps a monotone pmf within chi^2 2*gamma.

    Raises:
        ValidationError: If n < 1 or gamma <= 0
    """
    if n < 1 or gamma <= 0:
        raise ValidationError(f"birge_partition needs n >= 1 and gamma > 0, got n={n}, gamma={gamma}")
    return IntervalPartition.from_intervals(n, _birge_intervals(n, gamma))


def birge_grid_partition(dims: Sequence[int], gamma: float) -> IntervalPartition:
    """Rectangles I_j1 x ... x I_jd from the per-axis Birgé intervals of [n]^d."""
    dims = tuple(int(x) for x in dims)
    if not dims:
        raise ValidationError("birge_grid_partition needs at least one axis")
    if len(set(dims)) != 1:
        raise ValidationError(f"Birgé rectangles need equal axis sizes, got {dims}")
    if len(dims) == 1:
        return birge_partition(dims[0], gamma)
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    axis = _birge_intervals(dims[0], gamma)
    return _product([axis] * len(dims), dims)


def gamma_for_eps(eps: float, d: int = 1) -> float:
    """gamma with (1 + 2 gamma)^d - 1 = eps^2."""
    if eps <= 0 or d < 1:
        raise ValidationError(f"gamma_for_eps needs eps > 0 and d >= 1, got eps={eps}, d={d}")
    return ((1.0 + eps * eps) ** (1.0 / d) - 1.0) / 2.0


# ===== Sample-adaptive partition =====

def greedy_mass_cells(mass: np.ndarray, b: int, start: int = 0, stop: Optional[int] = None) -> list[Range]:
    """Split mass[start:stop] left to right into cells of mass about 1/b.

    Elements of mass >= 1/b become singletons; other cells close once they reach 1/b. A light
    remainder (before a singleton or at the end) joins the previous non-singleton cell when the
    result stays within 2/b, and stands alone otherwise.
    """
    stop = mass.size if stop is None else stop
    lo_cap, hi_cap = 1.0 / b, 2.0 / b
    cells: list[Range] = []
    masses: list[float] = []

    def flush(lo: int, hi: int, m: float) -> None:
        if cells and cells[-1][0] != cells[-1][1] and cells[-1][1] == lo - 1 and masses[-1] + m <= hi_cap:
            cells[-1] = (cells[-1][0], hi)
            masses[-1] += m
        else:
            cells.append((lo, hi))
            masses.append(m)

    cur: Optional[int] = None
    cur_mass = 0.0
    for i in range(start, stop):
        if mass[i] >= lo_cap:
            if cur is not None:
                flush(cur, i - 1, cur_mass)
                cur, cur_mass = None, 0.0
            cells.append((i, i))
            masses.append(float(mass[i]))
            continue
        if cur is not None and cur_mass + mass[i] > hi_cap:
            cells.append((cur, i - 1))
            masses.append(cur_mass)
            cur, cur_mass = None, 0.0
        if cur is None:
            cur = i
        cur_mass += float(mass[i])
        if cur_mass >= lo_cap:
            cells.append((cur, i))
            masses.append(cur_mass)
            cur, cur_mass = None, 0.0
    if cur is not None:
        flush(cur, stop - 1, cur_mass)
    return cells


def adaptive_mass_partition(counts: SampleCounts, b: int) -> IntervalPartition:
    """Cells of empirical mass in [1/(2b), 2/b], with singletons for elements of mass >= 1/b.

    Light cells (below 1/(2b)) only occur next to a singleton or at the right end.

    Raises:
        ValidationError: If b < 1, the counts are empty or not 1-d
    """
    if b < 1:
        raise ValidationError(f"b must be at least 1, got {b}")
    if counts.dims is not None and len(counts.dims) > 1:
        raise ValidationError("adaptive_mass_partition works on 1-d samples")
    m = counts.m_actual
    if m == 0:
        raise ValidationError("adaptive_mass_partition needs a non-empty sample")
    cells = greedy_mass_cells(counts.counts / m, b)
    logger.debug("adaptive partition b=%d m=%d -> %d cells", b, m, len(cells))
    return IntervalPartition.from_intervals(counts.n, cells)


def flatten(p: Pmf, part: IntervalPartition) -> Pmf:
    """Replace p by its within-cell averages.

    Raises:
        ValidationError: If the partition does not cover the domain
        DimensionMismatchError: If the partition is over a different domain
    """
    if part.n != p.n or (part.d > 1 and part.dims != p.shape):
        raise DimensionMismatchError(f"Partition over {part.dims} does not match pmf over {p.shape}")
    if not part.covers:
        raise ValidationError("flatten needs a partition that covers the domain")
    avg = part.cell_masses(p) / part.sizes()
    return Pmf(avg[part.labels()], dims=p.dims)
