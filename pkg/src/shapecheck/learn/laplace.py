"""Add-1 (Laplace) learners: flattened histograms and product pmfs."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..core.models import Pmf, SampleCounts
from ..errors import DimensionMismatchError, ValidationError
from ..partition import IntervalPartition, birge_grid_partition

logger = logging.getLogger(__name__)


def add1_learn(counts: SampleCounts, part: IntervalPartition) -> Pmf:
    """q_i = (m_j + 1) / ((m + b) |I_j|) for i in cell I_j, with b cells and m samples.

    The output sums to one by the identity sum_j (m_j + 1) = m + b.

    Raises:
        ValidationError: If the partition does not cover the domain
        DimensionMismatchError: If the partition is over another domain
    """
    if part.n != counts.n or (part.d > 1 and part.dims != counts.shape):
        raise DimensionMismatchError(f"Partition over {part.dims} does not match counts over {counts.shape}")
    if not part.covers:
        raise ValidationError("add1_learn needs a partition that covers the domain")
    b = len(part)
    m = counts.m_actual
    cell_q = (part.cell_masses(counts) + 1.0) / (m + b)
    q = (cell_q / part.sizes())[part.labels()]
    logger.debug("add-1 over %d cells from %d samples", b, m)
    return Pmf(q, dims=counts.dims)


def product_learn(axis_counts: Sequence[SampleCounts]) -> Pmf:
    """Tensor product of per-axis add-1 estimates over singleton cells.

    Raises:
        ValidationError: If no axes are given or the axes saw different sample totals
    """
    axis_counts = list(axis_counts)
    if not axis_counts:
        raise ValidationError("product_learn needs at least one axis")
    totals = {c.m_actual for c in axis_counts}
    if len(totals) != 1:
        raise ValidationError(f"Axis counts come from different sample totals: {sorted(totals)}")
    m = totals.pop()
    factors = [Pmf((c.counts + 1.0) / (m + c.n)) for c in axis_counts]
    return Pmf.tensor(*factors)


def monotone_learn(counts: SampleCounts, gamma: float) -> tuple[Pmf, IntervalPartition]:
    """add1_learn over the Birgé rectangles of the sample's domain."""
    part = birge_grid_partition(counts.shape, gamma)
    return add1_learn(counts, part), part
