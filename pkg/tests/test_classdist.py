"""
Unit tests for distances from an explicit pmf to a shape class.

Tests cover:
- Monotone LP distance in 1-d and on grids, with and without a cell partition
- Unimodal distance with pruned mode enumeration
- The lattice brute-force oracle and its agreement with the LPs
- dist_to_class dispatch
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapecheck.classdist import brute_force_dist, dist_to_class, dist_to_monotone, dist_to_unimodal
from shapecheck.core import ClassId, Pmf, tv_distance
from shapecheck.errors import ValidationError
from shapecheck.partition import IntervalPartition, birge_partition, flatten, singleton_partition
from shapecheck.sampling import PaninskiSpec, gen_paninski, gen_random_monotone, gen_zipf, make_rng


def small_pmfs(min_n=2, max_n=6):
    return st.lists(st.floats(0.0, 1.0), min_size=min_n, max_size=max_n).filter(
        lambda w: sum(w) > 0.1
    ).map(Pmf.from_weights)


class TestMonotoneDistance:
    """dist_to_monotone."""

    def test_increasing_pair(self):
        assert dist_to_monotone(Pmf([0.0, 1.0])) == pytest.approx(0.5)

    def test_member_is_zero(self):
        assert dist_to_monotone(gen_zipf(100, 1.0)) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_is_zero(self):
        assert dist_to_monotone(Pmf.uniform(7)) == pytest.approx(0.0, abs=1e-9)

    def test_bounded_by_tv_to_a_member(self):
        q = gen_paninski(PaninskiSpec.random(30, 0.1, 2.0, 3))
        assert dist_to_monotone(q) <= tv_distance(q, Pmf.uniform(30)) + 1e-9

    def test_cells_match_singletons(self):
        q = flatten(gen_paninski(PaninskiSpec.random(60, 0.2, 2.0, 1)), birge_partition(60, 0.3))
        part = birge_partition(60, 0.3)
        assert dist_to_monotone(q, part) == pytest.approx(dist_to_monotone(q), abs=1e-8)

    def test_not_cellwise_constant(self):
        part = IntervalPartition.from_intervals(3, [(0, 1), (2, 2)])
        with pytest.raises(ValidationError, match="constant"):
            dist_to_monotone(Pmf([0.5, 0.3, 0.2]), part)

    def test_grid(self):
        assert dist_to_monotone(gen_random_monotone((4, 4), 0)) == pytest.approx(0.0, abs=1e-9)
        bad = Pmf([0.0, 0.5, 0.0, 0.5], dims=(2, 2))
        assert dist_to_monotone(bad) == pytest.approx(0.5)

    def test_grid_dimension_limit(self):
        with pytest.raises(ValidationError, match="d <= 3"):
            dist_to_monotone(Pmf.uniform(16, dims=(2, 2, 2, 2)))

    def test_grid_needs_rectangle_product(self):
        cells = (((0, 0), (0, 1)), ((1, 1), (0, 1)))
        part = IntervalPartition(cells, (2, 2))
        with pytest.raises(ValidationError, match="rectangle"):
            dist_to_monotone(Pmf.uniform(4, dims=(2, 2)), part)


class TestUnimodalDistance:
    """dist_to_unimodal."""

    def test_valley(self):
        assert dist_to_unimodal(Pmf([0.5, 0.0, 0.5])) == pytest.approx(0.25)

    def test_members_are_zero(self):
        assert dist_to_unimodal(Pmf.from_weights([1, 2, 5, 3, 1])) == 0.0
        assert dist_to_unimodal(Pmf([0.3, 0.7])) == 0.0

    def test_needs_1d(self):
        with pytest.raises(ValidationError):
            dist_to_unimodal(Pmf.uniform(4, dims=(2, 2)))

    @settings(max_examples=40, deadline=None)
    @given(small_pmfs(3, 10))
    def test_at_most_monotone_distance(self, q):
        assert dist_to_unimodal(q) <= dist_to_monotone(q) + 1e-9

    @settings(max_examples=40, deadline=None)
    @given(small_pmfs(3, 10))
    def test_at_most_increasing_distance(self, q):
        # non-decreasing pmfs are unimodal too
        assert dist_to_unimodal(q) <= dist_to_monotone(Pmf(q.mass[::-1])) + 1e-9

    def test_with_partition(self):
        part = IntervalPartition.from_intervals(6, [(0, 1), (2, 3), (4, 5)])
        q = Pmf([0.2, 0.2, 0.05, 0.05, 0.25, 0.25])
        assert dist_to_unimodal(q, part) == pytest.approx(dist_to_unimodal(q), abs=1e-8)


class TestBruteForce:
    """Lattice oracle."""

    def test_monotone_example(self):
        assert brute_force_dist(ClassId.monotone(), Pmf([0.0, 1.0]), 1e-2) == pytest.approx(0.5)

    def test_unimodal_example(self):
        assert brute_force_dist(ClassId.unimodal(), Pmf([0.5, 0.0, 0.5]), 1e-2) == pytest.approx(0.25)

    def test_log_concave_enumeration(self):
        d = brute_force_dist(ClassId.log_concave(), Pmf([0.5, 0.0, 0.5]), 0.1)
        assert 1 / 3 - 1e-9 <= d <= 0.5

    def test_single_target(self):
        cls = ClassId.single_target(Pmf([0.5, 0.5]))
        assert brute_force_dist(cls, Pmf([0.25, 0.75])) == pytest.approx(0.25)

    def test_domain_limit(self):
        with pytest.raises(ValidationError):
            brute_force_dist(ClassId.monotone(), Pmf.uniform(9))

    def test_step_range(self):
        with pytest.raises(ValidationError):
            brute_force_dist(ClassId.monotone(), Pmf.uniform(3), 1e-4)

    def test_enumeration_limit(self):
        with pytest.raises(ValidationError, match="too large"):
            brute_force_dist(ClassId.mhr(), Pmf.uniform(8), 1e-3)

    @settings(max_examples=30, deadline=None)
    @given(small_pmfs(2, 5))
    def test_agrees_with_monotone_lp(self, q):
        step = 0.02
        exact = dist_to_monotone(q)
        oracle = brute_force_dist(ClassId.monotone(), q, step)
        assert exact <= oracle + 1e-9
        assert oracle <= exact + q.n * step

    @settings(max_examples=30, deadline=None)
    @given(small_pmfs(3, 5))
    def test_agrees_with_unimodal_lp(self, q):
        step = 0.02
        exact = dist_to_unimodal(q)
        oracle = brute_force_dist(ClassId.unimodal(), q, step)
        assert exact <= oracle + 1e-9
        assert oracle <= exact + q.n * step

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "cls,exact_dist,min_n",
        [(ClassId.monotone(), dist_to_monotone, 2), (ClassId.unimodal(), dist_to_unimodal, 3)],
        ids=["monotone", "unimodal"],
    )
    def test_fine_lattice_agrees_with_lp(self, cls, exact_dist, min_n):
        step = 1e-3
        rng = make_rng(20, min_n)
        for _ in range(50):
            n = int(rng.integers(min_n, 7))
            q = Pmf.from_weights(rng.dirichlet(np.ones(n)))
            exact = exact_dist(q)
            oracle = brute_force_dist(cls, q, step)
            assert exact <= oracle + 1e-9
            assert oracle <= exact + n * step


class TestDispatch:
    """dist_to_class."""

    def test_monotone_grid_defaults_to_singletons(self):
        q = gen_random_monotone((3, 3), 4)
        assert dist_to_class(ClassId.monotone(2, (3, 3)), q) == pytest.approx(0.0, abs=1e-9)

    def test_unimodal(self):
        assert dist_to_class(ClassId.unimodal(), Pmf([0.5, 0.0, 0.5])) == pytest.approx(0.25)

    def test_single_target(self):
        cls = ClassId.single_target(Pmf.uniform(2))
        assert dist_to_class(cls, Pmf([1.0, 0.0])) == pytest.approx(0.5)

    def test_no_exact_method(self):
        with pytest.raises(ValidationError, match="brute_force_dist"):
            dist_to_class(ClassId.log_concave(), Pmf.uniform(3))

    def test_singleton_partition_is_default(self):
        q = Pmf([0.1, 0.6, 0.3])
        assert dist_to_monotone(q, singleton_partition(3)) == pytest.approx(dist_to_monotone(q))
        assert np.isfinite(dist_to_unimodal(q))
