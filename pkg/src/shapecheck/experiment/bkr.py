"""Local-collision baseline for monotonicity testing.

Samples are bucketed by the Birgé intervals for gamma = eps. Within each bucket a distribution
that is close to flat produces about C(N_B, 2) / |B| same-element collisions among the N_B
samples that landed there; the statistic counts the observed collisions and the threshold
allows ``0.6 * ln(n)^2 / eps`` of excess over that baseline.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ..core.models import SampleCounts
from ..errors import ValidationError
from ..partition import birge_partition

logger = logging.getLogger(__name__)

BKR_CONSTANT = 0.6


def bkr_statistic(counts: SampleCounts, eps: float, constant: float = BKR_CONSTANT) -> tuple[float, float]:
    """Return (collisions, threshold); accept when collisions <= threshold.

    Raises:
        ValidationError: If the counts are not 1-d or eps is not positive
    """
    if counts.dims is not None and len(counts.dims) > 1:
        raise ValidationError("bkr_statistic works on 1-d counts")
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    n = counts.n
    part = birge_partition(n, eps)
    n_i = counts.counts.astype(float)
    collisions = float(np.sum(n_i * (n_i - 1.0)) / 2.0)
    n_b = part.cell_masses(counts)
    baseline = float(np.sum(n_b * (n_b - 1.0) / 2.0 / part.sizes()))
    slack = constant * math.log(max(n, 2)) ** 2 / eps
    logger.debug("bkr: %d buckets, collisions %.1f vs baseline %.1f + %.1f", len(part), collisions, baseline, slack)
    return collisions, baseline + slack
