"""The chi-squared statistic, the base tester with its variants, and the class testers.

Every class tester follows the same pipeline: learn a hypothesis q from one batch of samples,
check that q itself is close to the class, then run the chi-squared tester against q on a fresh
batch. Each stage draws its own samples from the source; no sample is used twice.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .classdist import dist_to_monotone, dist_to_unimodal
from .config import TestConfig
from .core.distances import subset_mask
from .core.models import ClassId, ClassKind, Pmf, SampleCounts, TestVerdict
from .errors import DimensionMismatchError, ValidationError
from .learn.hazard import mhr_min_samples, mhr_learn
from .learn.laplace import add1_learn, product_learn
from .learn.logconcave import lcd_learn, lcd_min_samples
from .learn.lp import FEAS_TOL
from .partition import (
    IntervalPartition,
    adaptive_mass_partition,
    birge_grid_partition,
    gamma_for_eps,
)
from .sampling import SampleSource

logger = logging.getLogger(__name__)

MONOTONE_MAX_D = 3
# eps below n^(-1/4) by more than this relative margin is refused by the unimodal tester.
VALIDITY_SLACK = 1e-9


# ===== Statistic =====

def active_set(q: Pmf, eps: float, cutoff_constant: float = 1.0 / 50) -> np.ndarray:
    """Mask of the symbols with q_i >= cutoff_constant * eps / n."""
    return q.mass >= cutoff_constant * eps / q.n


def _terms(counts: SampleCounts, q: Pmf, mask: np.ndarray) -> np.ndarray:
    """Per-symbol summands ((N_i - m q_i)^2 - N_i) / (m q_i), zero outside mask."""
    if counts.n != q.n:
        raise DimensionMismatchError(f"Counts over {counts.n} symbols, q over {q.n}")
    if np.any(q.mass[mask] <= 0):
        raise ValidationError("The chi-squared statistic needs q_i > 0 on the active set")
    out = np.zeros(q.n)
    m = counts.m_nominal
    if m == 0:
        # every numerator collapses to -N_i and every denominator to N_i
        out[mask] = -1.0
        return out
    n_i = counts.counts[mask].astype(float)
    expected = m * q.mass[mask]
    out[mask] = ((n_i - expected) ** 2 - n_i) / expected
    return out


def chi2_statistic(counts: SampleCounts, q: Pmf, A=None) -> float:
    """Z = sum over A of ((N_i - m q_i)^2 - N_i) / (m q_i), with m the nominal sample size.

    Args:
        counts: Sample counts; under Poissonization ``m_nominal`` is the Poisson mean
        q: Hypothesis pmf, positive on A
        A: Index set (indices or a boolean mask); the whole domain when None

    Raises:
        DimensionMismatchError: If counts and q disagree on n
        ValidationError: If q vanishes somewhere in A
    """
    return float(_terms(counts, q, subset_mask(q.n, A)).sum())


def statistic_moments(p: Pmf, q: Pmf, m: float, A=None) -> tuple[float, float]:
    """Mean and variance of Z under Poissonized sampling from p.

    E[Z] = m sum_A (p_i - q_i)^2 / q_i and
    Var[Z] = sum_A 2 p_i^2 / q_i^2 + 4 m p_i (p_i - q_i)^2 / q_i^2.
    """
    if p.n != q.n:
        raise DimensionMismatchError(f"Domain sizes differ: {p.n} vs {q.n}")
    mask = subset_mask(q.n, A)
    pa, qa = p.mass[mask], q.mass[mask]
    if np.any(qa <= 0):
        raise ValidationError("statistic_moments needs q_i > 0 on A")
    gap = (pa - qa) ** 2
    mean = m * float(np.sum(gap / qa))
    var = float(np.sum(2.0 * pa**2 / qa**2 + 4.0 * m * pa * gap / qa**2))
    return mean, var


def variance_bound(n: int, mean: float) -> float:
    """Upper bound on Var[Z] in terms of E[Z] alone, valid when q is positive on A."""
    return 4.0 * n + 9.0 * math.sqrt(n) * mean + 0.4 * n**0.25 * mean**1.5


@dataclass(frozen=True)
class SeparationMargins:
    """Where E[Z] +- sqrt(3) sd falls relative to the two limits the threshold sits between."""

    n: int
    eps: float
    m: float
    near_upper: float  # E[Z] + sqrt(3) sd at the largest in-class mean
    near_limit: float  # m eps^2 / 200
    far_lower: float  # E[Z] - sqrt(3) sd at the smallest far mean
    far_limit: float  # 3 m eps^2 / 20
    threshold: float

    @property
    def holds(self) -> bool:
        return self.near_upper <= self.near_limit and self.far_lower >= self.far_limit

    def to_dict(self) -> dict:
        return {**asdict(self), "holds": self.holds}


def separation_margins(n: int, eps: float, m_constant: float = 20000.0, threshold_constant: float = 0.1) -> SeparationMargins:
    """Check from the closed-form moments that the accept threshold separates both cases.

    In-class inputs have E[Z] <= m eps^2 / 500; inputs eps-far from the class have
    E[Z] >= m eps^2 / 5. Chebyshev at sqrt(3) standard deviations keeps each side on its
    half of the threshold with probability at least 2/3.
    """
    m = m_constant * math.sqrt(n) / eps**2
    scale = m * eps**2
    near = scale / 500.0
    far = scale / 5.0
    root3 = math.sqrt(3.0)
    return SeparationMargins(
        n=n,
        eps=eps,
        m=m,
        near_upper=near + root3 * math.sqrt(variance_bound(n, near)),
        near_limit=scale / 200.0,
        far_lower=far - root3 * math.sqrt(variance_bound(n, far)),
        far_limit=3.0 * scale / 20.0,
        threshold=threshold_constant * scale,
    )


# ===== Base tester and variants =====

def _gate(counts: SampleCounts, q: Pmf, mask: np.ndarray, cfg: TestConfig, threshold: Optional[float] = None, **detail: Any) -> TestVerdict:
    budget = cfg.tester_budget(q.n)
    if counts.m_nominal < budget:
        logger.warning("chi-squared stage runs on m=%d, below the configured %d", counts.m_nominal, budget)
    z = chi2_statistic(counts, q, mask)
    if threshold is None:
        threshold = cfg.threshold(counts.m_nominal, q.n)
    excluded = float(q.mass[~mask].sum())
    verdict = TestVerdict.from_gate(z, threshold, excluded, m=counts.m_nominal, active=int(mask.sum()), **detail)
    logger.info("Z=%.4g threshold=%.4g -> %s", z, threshold, verdict.decision.value)
    return verdict


def base_test(counts: SampleCounts, q: Pmf, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Accept iff Z over A = {q_i >= eps/(50n)} is at most the configured threshold.

    At the default constants this accepts with probability >= 2/3 when chi^2(p, q) <= eps^2/500
    and rejects with probability >= 2/3 when p is eps-far from a class q is eps/2-close to.
    """
    cfg = cfg or TestConfig()
    return _gate(counts, q, active_set(q, cfg.eps, cfg.cutoff_constant), cfg)


def robust_identity_test(counts: SampleCounts, q: Pmf, eps: float, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Tell chi^2(p, q) < eps^2/10 apart from d_TV(p, q) > eps.

    The threshold is ``identity_threshold_constant * m * eps^2`` under the proven rule and the
    experiment threshold otherwise.
    """
    cfg = (cfg or TestConfig()).with_eps(eps)
    threshold = None
    if cfg.threshold_rule == "proven":
        threshold = cfg.identity_threshold_constant * counts.m_nominal * eps**2
    return _gate(counts, q, active_set(q, eps, cfg.cutoff_constant), cfg, threshold)


def restricted_test(counts: SampleCounts, q: Pmf, S, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """base_test with the statistic summed over A intersected with S only.

    Raises:
        ValidationError: If S is empty or q has no mass on S
    """
    cfg = cfg or TestConfig()
    support = subset_mask(q.n, S)
    if not support.any():
        raise ValidationError("restricted_test needs a non-empty support")
    if q.mass[support].sum() <= 0:
        raise ValidationError("q has no mass on the restricted support")
    mask = active_set(q, cfg.eps, cfg.cutoff_constant) & support
    return _gate(counts, q, mask, cfg, support=int(support.sum()))


def max_removal_test(
    counts: SampleCounts,
    q: Pmf,
    cells: IntervalPartition,
    t: int = 1,
    cfg: Optional[TestConfig] = None,
) -> TestVerdict:
    """Drop the t largest per-cell statistics Z_j and threshold the sum of the rest.

    Only symbols inside ``cells`` and the active set contribute. Among equal Z_j the lowest cell
    index is dropped first.

    Raises:
        ValidationError: If there are fewer than t + 1 cells or t is negative
    """
    cfg = cfg or TestConfig()
    if t < 0:
        raise ValidationError(f"t must be nonnegative, got {t}")
    if len(cells) < t + 1:
        raise ValidationError(f"max_removal_test needs at least {t + 1} cells, got {len(cells)}")
    if cells.n != q.n:
        raise DimensionMismatchError(f"Cells cover {cells.n} symbols, q has {q.n}")
    mask = active_set(q, cfg.eps, cfg.cutoff_constant) & (cells.labels() >= 0)
    per_cell = cells.cell_masses(_terms(counts, q, mask))
    dropped = np.argsort(-per_cell, kind="stable")[:t]
    z = float(per_cell.sum() - per_cell[dropped].sum())
    threshold = cfg.threshold(counts.m_nominal, q.n)
    verdict = TestVerdict.from_gate(
        z,
        threshold,
        float(q.mass[~mask].sum()),
        m=counts.m_nominal,
        active=int(mask.sum()),
        dropped=sorted(int(j) for j in dropped),
        dropped_statistic=float(per_cell[dropped].sum()),
    )
    logger.info("Z after dropping %d of %d cells = %.4g (threshold %.4g)", t, len(cells), z, threshold)
    return verdict


# ===== Class testers =====

class _Trail:
    """Ordered record of the stages a class tester ran."""

    def __init__(self, tester: str):
        self.tester = tester
        self.stages: list[dict[str, Any]] = []

    def add(self, stage: str, **info: Any) -> None:
        self.stages.append({"stage": stage, **info})
        logger.debug("%s: %s %s", self.tester, stage, info)

    def finish(self, verdict: TestVerdict) -> TestVerdict:
        verdict.detail["tester"] = self.tester
        verdict.detail["stages"] = self.stages
        return verdict

    def reject(self, reason: str, excluded_mass: float = 0.0, **info: Any) -> TestVerdict:
        logger.info("%s rejected at %s", self.tester, reason)
        return self.finish(TestVerdict.reject(excluded_mass, reason=reason, **info))


def _config(cfg: Optional[TestConfig], eps: float) -> TestConfig:
    return (cfg or TestConfig()).with_eps(eps)


def _chi2_stage(trail: _Trail, source: SampleSource, cfg: TestConfig, n: int) -> SampleCounts:
    m = cfg.tester_budget(n)
    counts = source.draw(m, cfg.poissonized)
    trail.add("sample", purpose="statistic", m=m, m_actual=counts.m_actual)
    return counts


def _distance_gate(trail: _Trail, dist: float, eps: float) -> bool:
    """True when the hypothesis is too far from the class; ties within LP tolerance reject."""
    limit = eps / 2.0
    trail.add("distance", value=dist, limit=limit)
    return dist > limit - FEAS_TOL


def test_monotone(source: SampleSource, n: int, d: int, eps: float, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Test whether the source is monotone over [n]^d (non-increasing along every axis).

    Args:
        source: Sample source over n**d symbols
        n: Size of each axis
        d: Dimension, 1 to 3
        eps: Distance parameter

    Raises:
        ValidationError: If d is unsupported or the source does not match [n]^d
    """
    cfg = _config(cfg, eps)
    if not 1 <= d <= MONOTONE_MAX_D:
        raise ValidationError(f"test_monotone supports d in 1..{MONOTONE_MAX_D}, got {d}")
    dims = (n,) * d
    if source.n != n**d or (d > 1 and source.dims != dims):
        raise DimensionMismatchError(f"Source over {source.dims or source.n} does not match [{n}]^{d}")
    trail = _Trail(ClassId.monotone(d).label)

    gamma = cfg.birge_gamma or gamma_for_eps(eps * math.sqrt(cfg.closeness_constant / 2.0), d)
    part = birge_grid_partition(dims, gamma)
    trail.add("partition", kind="birge", gamma=gamma, cells=len(part))

    m_learn = math.ceil(2.0 * len(part) / (cfg.closeness_constant * eps**2))
    learn_counts = source.draw(m_learn, cfg.poissonized)
    q = add1_learn(learn_counts, part)
    trail.add("learn", learner="add1", m=m_learn, m_actual=learn_counts.m_actual)

    if _distance_gate(trail, dist_to_monotone(q, part), eps):
        return trail.reject("distance")

    counts = _chi2_stage(trail, source, cfg, q.n)
    return trail.finish(base_test(counts, q, cfg))


def _removal_set(part: IntervalPartition, q: Pmf, eps: float, b: int, cutoff: float) -> np.ndarray:
    """Mask of the cells the unimodal tester sets aside before the final statistic.

    A non-singleton cell goes when its density is outside (1 +- eps) of a neighbour's, when it
    carries less than 1/(2b) mass, or when its density is below cutoff * eps / n.

    Neighbours are compared by density, not by cell mass. The partition builds cells of about
    1/b mass each, so neighbouring masses agree by construction whatever the shape; the density
    ratio is what moves when the pmf bends inside a cell. Singletons are only subject to the
    density floor: flattening leaves them exact.
    """
    masses = part.cell_masses(q)
    sizes = part.sizes()
    density = masses / sizes
    k = len(part)
    removed = density < cutoff * eps / q.n
    for j in range(k):
        if sizes[j] == 1 or removed[j]:
            continue
        if masses[j] < 1.0 / (2.0 * b):
            removed[j] = True
            continue
        for nb in (j - 1, j + 1):
            if 0 <= nb < k:
                ratio = density[j] / density[nb] if density[nb] > 0 else math.inf
                if not 1.0 - eps <= ratio <= 1.0 + eps:
                    removed[j] = True
                    break
    return removed


def test_unimodal(source: SampleSource, n: int, eps: float, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Test whether a 1-d source is unimodal.

    Raises:
        ValidationError: If eps is at or below n^(-1/4), where the tester has no guarantee
    """
    cfg = _config(cfg, eps)
    floor = n ** -0.25
    if eps < floor * (1.0 - VALIDITY_SLACK):
        raise ValidationError(f"test_unimodal needs eps > n^(-1/4) = {floor:.4g}, got {eps}")
    if source.n != n or (source.dims is not None and len(source.dims) > 1):
        raise DimensionMismatchError(f"Source over {source.dims or source.n} is not [{n}]")
    trail = _Trail(ClassKind.UNIMODAL.value)

    b = max(2, math.ceil(cfg.unimodal_b_constant * math.log(max(n, 2)) / eps**2))
    log_b = math.log(b)
    m_part = math.ceil(cfg.partition_sample_constant * b * log_b)
    part_counts = source.draw(m_part, cfg.poissonized)
    if part_counts.m_actual == 0:
        return trail.reject("empty sample")
    part = adaptive_mass_partition(part_counts, b)
    trail.add("partition", kind="adaptive", b=b, cells=len(part), m=m_part)

    m_mass = math.ceil(cfg.unimodal_mass_sample_constant * b * log_b / eps**2)
    mass_counts = source.draw(m_mass, cfg.poissonized)
    q = add1_learn(mass_counts, part)
    trail.add("learn", learner="add1", m=m_mass, m_actual=mass_counts.m_actual)

    if _distance_gate(trail, dist_to_unimodal(q, part), eps):
        return trail.reject("distance")

    removed = _removal_set(part, q, eps, b, cfg.cutoff_constant)
    kept_cells = [cell for cell, gone in zip(part.intervals, removed) if not gone]
    kept_mass = float(part.cell_masses(q)[~removed].sum())
    excluded = 1.0 - kept_mass
    trail.add("removal", removed=int(removed.sum()), kept_mass=kept_mass)
    if kept_mass < 1.0 - cfg.unimodal_mass_slack * eps:
        return trail.reject("removed mass", excluded_mass=excluded)
    if len(kept_cells) <= cfg.removal_count:
        return trail.reject("too few cells", excluded_mass=excluded)

    kept = IntervalPartition.from_intervals(n, kept_cells)
    counts = _chi2_stage(trail, source, cfg, n)
    return trail.finish(max_removal_test(counts, q, kept, cfg.removal_count, cfg))


def _restricted_stage(trail: _Trail, source: SampleSource, q: Pmf, support: np.ndarray, cfg: TestConfig) -> TestVerdict:
    counts = _chi2_stage(trail, source, cfg, q.n)
    if support.size == 0:
        logger.info("%s learner kept no banded cells; testing on the whole domain", trail.tester)
        return trail.finish(base_test(counts, q, cfg))
    return trail.finish(restricted_test(counts, q, support, cfg))


def test_logconcave(source: SampleSource, n: int, eps: float, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Test whether a 1-d source is log-concave."""
    cfg = _config(cfg, eps)
    if source.n != n:
        raise DimensionMismatchError(f"Source over {source.n} symbols, expected {n}")
    trail = _Trail(ClassKind.LOG_CONCAVE.value)
    m_learn = max(1, lcd_min_samples(eps, cfg.lcd_sample_constant))
    samples = source.draw(m_learn, cfg.poissonized)
    out = lcd_learn(
        samples,
        eps,
        sample_constant=cfg.lcd_sample_constant,
        band_constant=cfg.lcd_band_constant,
        normalization_slack=cfg.lcd_normalization_slack,
    )
    trail.add("learn", learner="logconcave", m=m_learn, rejected=out.rejected, **out.info)
    if out.rejected:
        return trail.reject(f"learner: {out.reason}")
    return _restricted_stage(trail, source, out.q, out.support, cfg)


def test_mhr(source: SampleSource, n: int, eps: float, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Test whether a 1-d source has a monotone hazard rate."""
    cfg = _config(cfg, eps)
    if source.n != n:
        raise DimensionMismatchError(f"Source over {source.n} symbols, expected {n}")
    trail = _Trail(ClassKind.MHR.value)
    m_learn = max(1, mhr_min_samples(n, eps, cfg.mhr_sample_constant))
    samples = source.draw(m_learn, cfg.poissonized)
    out = mhr_learn(
        samples,
        eps,
        sample_constant=cfg.mhr_sample_constant,
        b_constant=cfg.mhr_b_constant,
        tail_constant=cfg.mhr_tail_constant,
        band_constant=cfg.mhr_band_constant,
    )
    trail.add("learn", learner="mhr", m=m_learn, rejected=out.rejected, **out.info)
    if out.rejected:
        return trail.reject(f"learner: {out.reason}")
    return _restricted_stage(trail, source, out.q, out.support, cfg)


def test_independence(source: SampleSource, dims: Sequence[int], eps: float, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Test whether the coordinates of a grid source are independent.

    Raises:
        ValidationError: If fewer than two axes are given or the source is over other dims
    """
    cfg = _config(cfg, eps)
    dims = tuple(int(x) for x in dims)
    if len(dims) < 2 or any(x < 1 for x in dims):
        raise ValidationError(f"test_independence needs at least two positive axes, got {dims}")
    if source.dims != dims:
        raise DimensionMismatchError(f"Source over {source.dims} does not match {dims}")
    trail = _Trail(ClassId.product(dims).label)

    m_learn = math.ceil(2.0 * sum(dims) / (cfg.closeness_constant * eps**2))
    learn_counts = source.draw(m_learn, cfg.poissonized)
    q = product_learn(learn_counts.marginals())
    trail.add("learn", learner="product", m=m_learn, m_actual=learn_counts.m_actual)

    counts = _chi2_stage(trail, source, cfg, q.n)
    return trail.finish(base_test(counts, q, cfg))


def test_identity(source: SampleSource, q: Pmf, eps: float, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Test whether the source equals the known pmf q."""
    cfg = _config(cfg, eps)
    if source.n != q.n:
        raise DimensionMismatchError(f"Source over {source.n} symbols, q over {q.n}")
    trail = _Trail(ClassKind.SINGLE_TARGET.value)
    counts = _chi2_stage(trail, source, cfg, q.n)
    return trail.finish(robust_identity_test(counts, q, eps, cfg))


def run_tester(cls: ClassId, source: SampleSource, eps: float, cfg: Optional[TestConfig] = None) -> TestVerdict:
    """Dispatch to the class tester for ``cls``.

    Monotone grids read the axis size from ``cls.dims`` (or the source's dims).
    """
    kind = cls.kind
    if kind is ClassKind.MONOTONE:
        dims = cls.dims or source.dims or (source.n,)
        if len(dims) != cls.d:
            raise DimensionMismatchError(f"{cls.label} does not match source dims {dims}")
        return test_monotone(source, dims[0], cls.d, eps, cfg)
    if kind is ClassKind.UNIMODAL:
        return test_unimodal(source, source.n, eps, cfg)
    if kind is ClassKind.LOG_CONCAVE:
        return test_logconcave(source, source.n, eps, cfg)
    if kind is ClassKind.MHR:
        return test_mhr(source, source.n, eps, cfg)
    if kind is ClassKind.PRODUCT:
        return test_independence(source, cls.dims, eps, cfg)
    return test_identity(source, cls.target, eps, cfg)


# pytest would otherwise collect the class testers from modules that import them by name
for _fn in (test_monotone, test_unimodal, test_logconcave, test_mhr, test_independence, test_identity):
    _fn.__test__ = False
del _fn
