"""Seeded sampling, empirical estimates and instance generators.

Randomness comes from numpy's PCG64 bit generator seeded through ``SeedSequence``,
so every stage of a pipeline gets its own reproducible, non-overlapping stream.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, Union

import numpy as np

from .core.membership import is_monotone_grid
from .core.models import Pmf, SampleCounts
from .errors import GenerationError, SampleBudgetError, ValidationError

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence, np.random.Generator]

# Above this size perturb_far_from_monotone certifies farness with raise points instead of an LP.
EXACT_VERIFY_MAX_N = 1024


# ===== Random streams =====

def _seed_sequence(seed: Union[int, np.random.SeedSequence]) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValidationError(f"Seeds are 64-bit unsigned integers, got {seed}")
    return np.random.SeedSequence(seed)


def make_rng(seed: Seed, *stream: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; ``stream`` selects an independent child stream.

    A Generator passed in is returned as is (and must not be combined with ``stream``).
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise ValidationError("Cannot derive a stream from an existing Generator")
        return seed
    ss = _seed_sequence(seed)
    if stream:
        ss = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(stream))
    return np.random.Generator(np.random.PCG64(ss))


def spawn_seeds(seed: Union[int, np.random.SeedSequence], count: int) -> list[np.random.SeedSequence]:
    return _seed_sequence(seed).spawn(count)


def random_signs(count: int, seed: Seed) -> np.ndarray:
    """``count`` independent uniform signs in {-1, +1}."""
    rng = make_rng(seed)
    return rng.integers(0, 2, size=count) * 2 - 1


# ===== Sampling =====

def draw(p: Pmf, m: int, seed: Seed) -> SampleCounts:
    """Counts of m i.i.d. samples from p (multinomial)."""
    if m < 0:
        raise ValidationError(f"Sample size must be nonnegative, got {m}")
    rng = make_rng(seed)
    counts = rng.multinomial(int(m), p.mass / p.mass.sum())
    return SampleCounts(counts, int(m), dims=p.dims)


def poissonized_draw(p: Pmf, m: int, seed: Seed) -> SampleCounts:
    """Counts of Poisson(m) samples from p: independent Poisson(m p_i) per symbol."""
    if m < 1:
        raise ValidationError(f"Poissonized sampling needs m >= 1, got {m}")
    rng = make_rng(seed)
    counts = rng.poisson(float(m) * p.mass)
    return SampleCounts(counts, int(m), dims=p.dims)


def empirical_pmf(counts: SampleCounts) -> Pmf:
    m = counts.m_actual
    if m < 1:
        raise ValidationError("Empirical pmf of an empty sample")
    return Pmf(counts.counts / m, dims=counts.dims)


def dkw_radius(m: int, delta: float) -> float:
    """Width r with Pr[d_K(p, empirical) >= r] <= delta for m samples."""
    if m < 1 or not 0 < delta < 1:
        raise ValidationError("dkw_radius needs m >= 1 and delta in (0, 1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * m))


def dkw_sample_size(eps: float, delta: float) -> int:
    """Samples needed for the empirical CDF to be eps-close in Kolmogorov distance w.p. 1 - delta."""
    if eps <= 0 or not 0 < delta < 1:
        raise ValidationError("dkw_sample_size needs eps > 0 and delta in (0, 1)")
    return math.ceil(math.log(2.0 / delta) / (2.0 * eps * eps))


# ===== Sample sources =====

class SampleSource(Protocol):
    """Something the end-to-end testers can pull fresh samples from."""

    n: int
    dims: Optional[tuple[int, ...]]

    def draw(self, m: int, poissonized: bool = True) -> SampleCounts:
        ...


class PmfSource:
    """Samples a known pmf; each call draws from its own child stream."""

    def __init__(self, pmf: Pmf, seed: Union[int, np.random.SeedSequence] = 0):
        self.pmf = pmf
        self.n = pmf.n
        self.dims = pmf.dims
        self._seq = _seed_sequence(seed)
        self.drawn = 0  # realized samples handed out so far

    def draw(self, m: int, poissonized: bool = True) -> SampleCounts:
        rng = np.random.Generator(np.random.PCG64(self._seq.spawn(1)[0]))
        counts = poissonized_draw(self.pmf, m, rng) if poissonized else draw(self.pmf, m, rng)
        self.drawn += counts.m_actual
        logger.debug("drew %d samples (m=%d, poissonized=%s)", counts.m_actual, m, poissonized)
        return counts


class CountsSource:
    """Splits one fixed sample across stages by count; no sample is handed out twice."""

    def __init__(self, counts: SampleCounts, seed: Union[int, np.random.SeedSequence] = 0):
        self.n = counts.n
        self.dims = counts.dims
        self._remaining = counts.counts.astype(np.int64).copy()
        self._rng = make_rng(_seed_sequence(seed))

    @property
    def remaining(self) -> int:
        return int(self._remaining.sum())

    def draw(self, m: int, poissonized: bool = True) -> SampleCounts:
        """Random subsample of size m (Poisson(m) when poissonized) without replacement.

        Raises:
            SampleBudgetError: If fewer samples remain than requested
        """
        k = int(self._rng.poisson(m)) if poissonized else int(m)
        if k > self.remaining:
            raise SampleBudgetError(
                f"Stage needs {k} samples but only {self.remaining} remain in the fixed sample"
            )
        sub = self._rng.multivariate_hypergeometric(self._remaining, k)
        self._remaining -= sub
        return SampleCounts(sub, int(m), dims=self.dims)


# ===== Generators =====

@dataclass(frozen=True)
class PaninskiSpec:
    """Parameters of a paired-perturbation instance around uniform(n)."""

    n: int
    eps: float
    c: float
    signs: tuple[int, ...]

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValidationError(f"Paninski instances need an even n >= 2, got {self.n}")
        if not 0 < self.eps < 1:
            raise ValidationError(f"eps must lie in (0, 1), got {self.eps}")
        if self.c <= 0 or self.c * self.eps >= 1:
            raise ValidationError(f"Need c > 0 and c*eps < 1, got c*eps = {self.c * self.eps}")
        signs = tuple(int(z) for z in self.signs)
        if len(signs) != self.n // 2 or any(z not in (-1, 1) for z in signs):
            raise ValidationError(f"Need {self.n // 2} signs in {{-1, +1}}")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def random(cls, n: int, eps: float, c: float, seed: Seed) -> "PaninskiSpec":
        return cls(n, eps, c, tuple(random_signs(n // 2, seed)))


def gen_paninski(spec: PaninskiSpec) -> Pmf:
    """uniform(n) with pair (2l, 2l+1) moved to ((1 + z_l c eps)/n, (1 - z_l c eps)/n)."""
    z = np.asarray(spec.signs, dtype=float)
    shift = spec.c * spec.eps * z
    mass = np.empty(spec.n)
    mass[0::2] = (1.0 + shift) / spec.n
    mass[1::2] = (1.0 - shift) / spec.n
    return Pmf(mass)


def gen_paninski_grid(n: int, d: int, eps: float, c: float, seed: Seed) -> Pmf:
    """Paired perturbation of uniform over [n]^d along the first axis."""
    if n < 2 or n % 2 or d < 1:
        raise ValidationError(f"Need an even n >= 2 and d >= 1, got n={n}, d={d}")
    if c <= 0 or not 0 < eps < 1 or c * eps >= 1:
        raise ValidationError(f"Need 0 < eps < 1 and 0 < c*eps < 1, got c*eps = {c * eps}")
    pair_shape = (n // 2,) + (n,) * (d - 1)
    z = random_signs(int(np.prod(pair_shape)), seed).reshape(pair_shape)
    cells = float(n) ** d
    grid = np.empty((n,) * d)
    grid[0::2] = (1.0 + c * eps * z) / cells
    grid[1::2] = (1.0 - c * eps * z) / cells
    return Pmf(grid.ravel(), dims=(n,) * d if d > 1 else None)


def gen_zipf(n: int, s: float) -> Pmf:
    """mass_i proportional to (i+1)^-s."""
    if n < 1 or s < 0:
        raise ValidationError(f"Need n >= 1 and s >= 0, got n={n}, s={s}")
    return Pmf.from_weights(np.arange(1, n + 1, dtype=float) ** (-s))


def gen_triangular(n: int) -> Pmf:
    """Discretized triangle peaking in the middle (log-concave)."""
    if n < 1:
        raise ValidationError(f"Need n >= 1, got {n}")
    i = np.arange(n)
    return Pmf.from_weights(np.minimum(i + 1, n - i).astype(float))


def gen_geometric(n: int, r: float) -> Pmf:
    """Truncated geometric r^i (log-concave and MHR)."""
    if n < 1 or not 0 < r <= 1:
        raise ValidationError(f"Need n >= 1 and r in (0, 1], got n={n}, r={r}")
    return Pmf.from_weights(r ** np.arange(n, dtype=float))


def gen_random_monotone(dims: Union[int, Sequence[int]], seed: Seed) -> Pmf:
    """Random pmf non-increasing along every axis (suffix sums of random increments)."""
    shape = (int(dims),) if isinstance(dims, (int, np.integer)) else tuple(int(x) for x in dims)
    rng = make_rng(seed)
    w = rng.exponential(size=shape) ** rng.uniform(1.0, 4.0)
    for axis in range(len(shape)):
        w = np.flip(np.cumsum(np.flip(w, axis=axis), axis=axis), axis=axis)
    return Pmf.from_weights(w.ravel(), dims=shape if len(shape) > 1 else None)


def gen_far_from_product(dims: Sequence[int], eps: float, c: float, seed: Seed) -> Pmf:
    """Every cell of uniform over the grid scaled by an independent (1 +- c eps), then normalized."""
    dims = tuple(int(x) for x in dims)
    if len(dims) < 2:
        raise ValidationError("A product-class instance needs at least two axes")
    if c <= 0 or not 0 < eps < 1 or c * eps >= 1:
        raise ValidationError(f"Need 0 < eps < 1 and 0 < c*eps < 1, got c*eps = {c * eps}")
    z = random_signs(int(np.prod(dims)), seed)
    return Pmf.from_weights(1.0 + c * eps * z, dims=dims)


def raise_point_bound(q: np.ndarray) -> float:
    """Lower bound on the TV distance from q to every monotone pmf.

    Each disjoint pair (i, i+1) with q_i < q_{i+1} costs any non-increasing p at least
    q_{i+1} - q_i in l1. Pairs are taken greedily from the left.
    """
    total = 0.0
    i = 0
    while i < q.size - 1:
        gap = q[i + 1] - q[i]
        if gap > 0:
            total += gap
            i += 2
        else:
            i += 1
    return 0.5 * total


def perturb_far_from_monotone(p: Pmf, eps: float, seed: Seed, max_tries: int = 10) -> Pmf:
    """Paired +- perturbation of a monotone p that is at least eps from every monotone pmf.

    Each pair (2l, 2l+1) is flattened to its average a_l and split as (a_l(1 + z_l t), a_l(1 - z_l t))
    with random signs; t starts where the raise-point bound reaches eps and grows until the
    measured distance does (exact LP for n <= EXACT_VERIFY_MAX_N, raise-point bound above).

    Raises:
        ValidationError: If p is not a 1-d monotone pmf
        GenerationError: If eps cannot be reached with t < 1
    """
    if eps < 0:
        raise ValidationError(f"eps must be nonnegative, got {eps}")
    if eps == 0:
        return p
    if p.d != 1 or not is_monotone_grid(p.mass):
        raise ValidationError("perturb_far_from_monotone needs a 1-d monotone pmf")
    pairs = p.n // 2
    if pairs == 0:
        raise GenerationError("A single-element domain has no pairs to perturb")

    z = random_signs(pairs, seed).astype(float)
    even = p.mass[0:2 * pairs:2]
    odd = p.mass[1:2 * pairs:2]
    avg = 0.5 * (even + odd)
    raised = float(avg[z < 0].sum())
    if raised <= 0:
        raise GenerationError("No mass on the pairs that would become raise points")

    def build(t: float) -> Pmf:
        mass = p.mass.copy()
        mass[0:2 * pairs:2] = avg * (1.0 + z * t)
        mass[1:2 * pairs:2] = avg * (1.0 - z * t)
        return Pmf.from_weights(mass)

    def distance(q: Pmf) -> float:
        if q.n <= EXACT_VERIFY_MAX_N:
            from .classdist import dist_to_monotone

            return dist_to_monotone(q)
        return raise_point_bound(q.mass)

    t = 1.05 * eps / raised
    for attempt in range(1, max_tries + 1):
        if t >= 1.0:
            break
        q = build(t)
        dist = distance(q)
        if dist >= eps:
            logger.debug("perturbation t=%.4g reached distance %.4g after %d tries", t, dist, attempt)
            return q
        logger.warning("perturbation t=%.4g only reached %.4g < %.4g, retrying", t, dist, eps)
        t = t * 1.05 * (eps / dist) if dist > 0 else 2.0 * t
    raise GenerationError(f"Cannot push the pmf {eps} away from monotone with a pair perturbation")
