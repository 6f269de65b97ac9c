"""
Unit tests for the chi-squared statistic, the base tester and the class testers.

Tests cover:
- chi2_statistic edge cases and invariances
- Closed-form moments, the variance bound and threshold separation
- base_test, robust_identity_test, restricted_test, max_removal_test
- Class tester pipelines: stage records, early rejection and input validation
- run_tester dispatch
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shapecheck.config import TestConfig, preset_config
from shapecheck.core import ClassId, Pmf, SampleCounts
from shapecheck.errors import DimensionMismatchError, ValidationError
from shapecheck.partition import IntervalPartition
from shapecheck.sampling import PmfSource, gen_triangular
from shapecheck.testers import (
    _removal_set,
    active_set,
    base_test,
    chi2_statistic,
    max_removal_test,
    restricted_test,
    robust_identity_test,
    run_tester,
    separation_margins,
    statistic_moments,
    test_identity as identity_tester,
    test_independence as independence_tester,
    test_logconcave as logconcave_tester,
    test_monotone as monotone_tester,
    test_unimodal as unimodal_tester,
    variance_bound,
)


class RecordingSource:
    """PmfSource that remembers the sample size of every draw."""

    def __init__(self, pmf: Pmf, seed: int = 0):
        self._inner = PmfSource(pmf, seed)
        self.n = pmf.n
        self.dims = pmf.dims
        self.requests: list[int] = []

    def draw(self, m: int, poissonized: bool = True) -> SampleCounts:
        self.requests.append(m)
        return self._inner.draw(m, poissonized)


# ===== Fixtures =====

@pytest.fixture
def experiment_cfg():
    return preset_config("experiment", eps=0.25)


@pytest.fixture
def uniform10():
    return Pmf.uniform(10)


def exact_counts(q: Pmf, m: int) -> SampleCounts:
    """Counts equal to m * q (q must make these integers)."""
    return SampleCounts(np.rint(q.mass * m).astype(int), m)


class TestStatistic:
    """chi2_statistic."""

    def test_balanced_example(self):
        assert chi2_statistic(SampleCounts([5, 5], 10), Pmf([0.5, 0.5])) == pytest.approx(-2.0)

    def test_no_samples(self, uniform10):
        assert chi2_statistic(SampleCounts(np.zeros(10, int), 0), uniform10) == -10.0

    def test_no_samples_on_subset(self, uniform10):
        assert chi2_statistic(SampleCounts(np.zeros(10, int), 0), uniform10, A=[0, 1, 2]) == -3.0

    def test_subset_sum(self):
        counts = SampleCounts([8, 2], 10)
        q = Pmf([0.5, 0.5])
        full = chi2_statistic(counts, q)
        parts = chi2_statistic(counts, q, A=[0]) + chi2_statistic(counts, q, A=[1])
        assert full == pytest.approx(parts)
        assert chi2_statistic(counts, q, A=[0]) == pytest.approx((9 - 8) / 5)

    def test_zero_q_on_subset(self):
        with pytest.raises(ValidationError):
            chi2_statistic(SampleCounts([1, 1], 2), Pmf([1.0, 0.0]))

    def test_zero_q_outside_subset(self):
        assert chi2_statistic(SampleCounts([2, 0], 2), Pmf([1.0, 0.0]), A=[0]) == pytest.approx(-1.0)

    def test_domain_mismatch(self, uniform10):
        with pytest.raises(DimensionMismatchError):
            chi2_statistic(SampleCounts([1, 1], 2), uniform10)

    @given(
        st.lists(st.tuples(st.integers(0, 30), st.floats(0.01, 1.0)), min_size=2, max_size=20),
        st.randoms(use_true_random=False),
    )
    def test_permutation_invariant(self, pairs, rnd):
        counts = [c for c, _ in pairs]
        q = Pmf.from_weights([w for _, w in pairs])
        order = list(range(len(pairs)))
        rnd.shuffle(order)
        z = chi2_statistic(SampleCounts(counts, sum(counts) + 1), q)
        z_perm = chi2_statistic(
            SampleCounts([counts[i] for i in order], sum(counts) + 1),
            Pmf(q.mass[order]),
        )
        assert z == pytest.approx(z_perm, rel=1e-9, abs=1e-9)

    def test_active_set_cutoff(self):
        q = Pmf([0.9, 0.0995, 0.0005])
        assert active_set(q, 0.1, 1.0 / 50).tolist() == [True, True, False]


class TestMoments:
    """Closed-form moments and separation."""

    def test_identical_pmfs(self, uniform10):
        mean, var = statistic_moments(uniform10, uniform10, 1000)
        assert mean == 0.0
        assert var == pytest.approx(2 * 10)

    def test_mean_is_m_times_chi2(self):
        p, q = Pmf([0.75, 0.25]), Pmf([0.5, 0.5])
        mean, _ = statistic_moments(p, q, 200)
        assert mean == pytest.approx(200 * 0.25)

    def test_moments_need_positive_q(self):
        with pytest.raises(ValidationError):
            statistic_moments(Pmf([0.5, 0.5]), Pmf([1.0, 0.0]), 10)

    def test_variance_bound_at_zero_mean(self):
        assert variance_bound(100, 0.0) == 400.0

    @pytest.mark.parametrize("n", [100, 10_000])
    @pytest.mark.parametrize("eps", [0.1, 0.25])
    def test_separation_holds_at_default_constants(self, n, eps):
        margins = separation_margins(n, eps)
        assert margins.holds
        assert margins.near_limit < margins.threshold < margins.far_limit

    def test_separation_fails_with_small_budget(self):
        assert not separation_margins(100, 0.1, m_constant=1.0).holds

    def test_margins_dict(self):
        data = separation_margins(100, 0.1).to_dict()
        assert data["holds"] is True
        assert set(data) >= {"near_upper", "far_lower", "threshold"}


class TestBaseTester:
    """base_test and its variants."""

    def test_exact_counts_accept(self, uniform10):
        cfg = TestConfig(eps=0.5)
        m = cfg.tester_budget(10)
        m -= m % 10
        verdict = base_test(exact_counts(uniform10, m), uniform10, cfg)
        assert verdict.accepted
        assert verdict.statistic == pytest.approx(-10.0)
        assert verdict.excluded_mass == 0.0

    def test_concentrated_counts_reject(self, uniform10):
        cfg = TestConfig(eps=0.5)
        m = cfg.tester_budget(10)
        counts = SampleCounts([m] + [0] * 9, m)
        verdict = base_test(counts, uniform10, cfg)
        assert not verdict.accepted
        assert verdict.detail["m"] == m

    def test_small_sample_warns(self, uniform10, caplog):
        base_test(SampleCounts([1] * 10, 10), uniform10, TestConfig(eps=0.5))
        assert "below the configured" in caplog.text

    def test_experiment_threshold(self, uniform10):
        cfg = preset_config("experiment", eps=0.5)
        verdict = base_test(exact_counts(uniform10, 1000), uniform10, cfg)
        assert verdict.threshold == pytest.approx(2 * 1000 * 0.25 + np.sqrt(20))

    def test_excluded_mass_reported(self):
        q = Pmf([0.5, 0.4999, 0.0001])
        verdict = base_test(SampleCounts([5, 5, 0], 10), q, TestConfig(eps=0.5))
        assert verdict.excluded_mass == pytest.approx(0.0001)
        assert verdict.detail["active"] == 2

    def test_identity_threshold(self, uniform10):
        verdict = robust_identity_test(exact_counts(uniform10, 1000), uniform10, 0.2)
        assert verdict.threshold == pytest.approx(0.3 * 1000 * 0.04)
        assert verdict.accepted

    def test_restricted_only_counts_support(self):
        q = Pmf([0.5, 0.5])
        counts = SampleCounts([10, 0], 10)
        verdict = restricted_test(counts, q, [1], TestConfig(eps=0.5))
        assert verdict.statistic == pytest.approx(chi2_statistic(counts, q, A=[1]))
        assert verdict.detail["support"] == 1

    def test_restricted_empty_support(self, uniform10):
        with pytest.raises(ValidationError, match="non-empty"):
            restricted_test(SampleCounts([1] * 10, 10), uniform10, [])

    def test_restricted_massless_support(self):
        with pytest.raises(ValidationError, match="no mass"):
            restricted_test(SampleCounts([1, 1], 2), Pmf([1.0, 0.0]), [1])


class TestMaxRemoval:
    """max_removal_test."""

    @pytest.fixture
    def cells(self):
        return IntervalPartition.from_intervals(6, [(0, 1), (2, 3), (4, 5)])

    @pytest.fixture
    def skewed_counts(self):
        return SampleCounts([30, 30, 5, 5, 10, 10], 90)

    def test_t_zero_is_plain_sum(self, cells, skewed_counts):
        q = Pmf.uniform(6)
        verdict = max_removal_test(skewed_counts, q, cells, t=0, cfg=TestConfig(eps=0.5))
        assert verdict.statistic == pytest.approx(chi2_statistic(skewed_counts, q))
        assert verdict.detail["dropped"] == []

    def test_drops_largest_cell(self, cells, skewed_counts):
        q = Pmf.uniform(6)
        verdict = max_removal_test(skewed_counts, q, cells, t=1, cfg=TestConfig(eps=0.5))
        assert verdict.detail["dropped"] == [0]
        assert verdict.statistic == pytest.approx(chi2_statistic(skewed_counts, q, A=[2, 3, 4, 5]))

    def test_ties_drop_lowest_index(self):
        cells = IntervalPartition.from_intervals(4, [(0, 1), (2, 3)])
        verdict = max_removal_test(SampleCounts([3, 3, 3, 3], 12), Pmf.uniform(4), cells, t=1)
        assert verdict.detail["dropped"] == [0]

    def test_uncovered_symbols_ignored(self):
        cells = IntervalPartition.from_intervals(4, [(0, 0), (1, 1)])
        counts = SampleCounts([3, 3, 0, 6], 12)
        verdict = max_removal_test(counts, Pmf.uniform(4), cells, t=0, cfg=TestConfig(eps=0.5))
        assert verdict.statistic == pytest.approx(chi2_statistic(counts, Pmf.uniform(4), A=[0, 1]))
        assert verdict.excluded_mass == pytest.approx(0.5)

    def test_validation(self, cells, skewed_counts):
        q = Pmf.uniform(6)
        with pytest.raises(ValidationError):
            max_removal_test(skewed_counts, q, cells, t=-1)
        with pytest.raises(ValidationError):
            max_removal_test(skewed_counts, q, cells, t=3)
        with pytest.raises(DimensionMismatchError):
            max_removal_test(SampleCounts([1] * 5, 5), Pmf.uniform(5), cells, t=1)


class TestRemovalSet:
    """Cells the unimodal tester sets aside."""

    def test_equal_masses_unequal_densities_are_removed(self):
        q = Pmf([0.25, 0.25, 0.125, 0.125, 0.125, 0.125])
        part = IntervalPartition.from_intervals(6, [(0, 1), (2, 5)])
        assert _removal_set(part, q, 0.25, 2, 0.02).tolist() == [True, True]

    def test_singleton_survives_density_jump(self):
        q = Pmf([0.5] + [0.0625] * 8)
        part = IntervalPartition.from_intervals(9, [(0, 0), (1, 4), (5, 8)])
        assert _removal_set(part, q, 0.25, 4, 0.02).tolist() == [False, True, False]

    def test_light_cell_is_removed(self):
        q = Pmf([0.05, 0.05, 0.45, 0.45])
        part = IntervalPartition.from_intervals(4, [(0, 1), (2, 3)])
        assert _removal_set(part, q, 0.25, 2, 0.02).tolist() == [True, True]


class TestClassTesters:
    """End-to-end pipelines on small inputs."""

    def test_monotone_rejects_increasing_source(self, experiment_cfg):
        source = RecordingSource(Pmf.point_mass(64, 63), seed=1)
        verdict = monotone_tester(source, 64, 1, 0.25, experiment_cfg)
        assert not verdict.accepted
        assert verdict.detail["reason"] == "distance"
        assert [s["stage"] for s in verdict.detail["stages"]] == ["partition", "learn", "distance"]
        assert len(source.requests) == 1

    def test_monotone_validates_dimension(self, experiment_cfg):
        with pytest.raises(ValidationError):
            monotone_tester(PmfSource(Pmf.uniform(16)), 2, 4, 0.25, experiment_cfg)

    def test_monotone_validates_source(self, experiment_cfg):
        with pytest.raises(DimensionMismatchError):
            monotone_tester(PmfSource(Pmf.uniform(10)), 4, 2, 0.25, experiment_cfg)

    def test_unimodal_refuses_small_eps(self):
        with pytest.raises(ValidationError, match="n\\^\\(-1/4\\)"):
            unimodal_tester(PmfSource(Pmf.uniform(16)), 16, 0.4)

    def test_unimodal_accepts_triangular(self, experiment_cfg):
        p = gen_triangular(2000)
        verdicts = [unimodal_tester(PmfSource(p, seed), 2000, 0.25, experiment_cfg) for seed in range(5)]
        assert sum(v.accepted for v in verdicts) >= 4
        assert all(v.detail.get("reason") != "removed mass" for v in verdicts)

    def test_logconcave_learner_reject_skips_statistic(self, experiment_cfg):
        source = RecordingSource(Pmf([0.5, 0.0, 0.5]), seed=2)
        verdict = logconcave_tester(source, 3, 0.5, experiment_cfg)
        assert not verdict.accepted
        assert verdict.detail["reason"].startswith("learner")
        assert len(source.requests) == 1
        assert verdict.statistic is None

    def test_identity_accepts_target(self, experiment_cfg):
        q = Pmf.uniform(100)
        verdict = identity_tester(PmfSource(q, seed=4), q, 0.25, experiment_cfg)
        assert verdict.accepted
        assert verdict.detail["tester"] == "identity"
        assert verdict.detail["stages"][0]["m"] == experiment_cfg.tester_budget(100)

    def test_identity_rejects_far_source(self, experiment_cfg):
        far = Pmf.from_weights([1.0] * 50 + [0.0] * 50)
        verdict = identity_tester(PmfSource(far, seed=4), Pmf.uniform(100), 0.25, experiment_cfg)
        assert not verdict.accepted

    def test_identity_domain_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            identity_tester(PmfSource(Pmf.uniform(3)), Pmf.uniform(4), 0.25)

    def test_independence_stages(self, experiment_cfg):
        joint = Pmf.uniform(16, dims=(4, 4))
        source = RecordingSource(joint, seed=5)
        verdict = independence_tester(source, (4, 4), 0.25, experiment_cfg)
        assert verdict.detail["tester"] == "product(4, 4)"
        assert [s["stage"] for s in verdict.detail["stages"]] == ["learn", "sample"]
        assert len(source.requests) == 2

    def test_independence_needs_axes(self, experiment_cfg):
        with pytest.raises(ValidationError):
            independence_tester(PmfSource(Pmf.uniform(4)), (4,), 0.25, experiment_cfg)

    def test_independence_dims_mismatch(self, experiment_cfg):
        with pytest.raises(DimensionMismatchError):
            independence_tester(PmfSource(Pmf.uniform(16, dims=(4, 4))), (2, 8), 0.25, experiment_cfg)


class TestDispatch:
    """run_tester."""

    def test_identity(self, experiment_cfg):
        q = Pmf.uniform(50)
        verdict = run_tester(ClassId.single_target(q), PmfSource(q, 1), 0.25, experiment_cfg)
        assert verdict.detail["tester"] == "identity"

    def test_monotone_grid_uses_class_dims(self, experiment_cfg):
        source = PmfSource(Pmf([0.0] * 63 + [1.0], dims=(8, 8)), 3)
        verdict = run_tester(ClassId.monotone(2, (8, 8)), source, 0.25, experiment_cfg)
        assert verdict.detail["tester"] == "monotone(d=2)"

    def test_monotone_dims_mismatch(self, experiment_cfg):
        with pytest.raises(DimensionMismatchError):
            run_tester(ClassId.monotone(2), PmfSource(Pmf.uniform(16)), 0.25, experiment_cfg)
