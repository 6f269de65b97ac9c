"""
Unit tests for the accuracy experiment and the collision baseline.

Tests cover:
- bkr_statistic worked values and validation
- ExperimentConfig validation
- Instance construction (uniform, zipf, custom)
- Reproducible sweeps and the CSV round trip through files
"""

import csv
import json
import math

import pytest

from shapecheck.classdist import dist_to_monotone
from shapecheck.core import ClassId, Pmf, SampleCounts, is_member, tv_distance
from shapecheck.errors import ValidationError
from shapecheck.experiment import CSV_COLUMNS, ExperimentConfig, Instance, TesterKind, bkr_statistic, experiment_accuracy
from shapecheck.experiment.harness import build_instances, iter_rows, read_csv, with_tester, write_csv


# ===== Fixtures =====

@pytest.fixture
def small_cfg():
    """A sweep small enough to run in a unit test."""
    return ExperimentConfig(n=200, eps=0.1, reps=5, sample_grid=[400, 800], seed=3)


def _without_timing(rows):
    return [{k: v for k, v in r.as_row().items() if k != "wall_ms"} for r in rows]


class TestBKR:
    """Local-collision statistic."""

    def test_no_collisions(self):
        collisions, threshold = bkr_statistic(SampleCounts([1] * 50, 50), 0.2)
        assert collisions == 0.0
        assert threshold >= 0.6 * math.log(50) ** 2 / 0.2

    def test_worked_value(self):
        # Birgé cells for n=4, gamma=1 are [0], [1], [2, 3]
        collisions, threshold = bkr_statistic(SampleCounts([0, 0, 0, 10], 10), 1.0)
        assert collisions == 45.0
        assert threshold == pytest.approx(22.5 + 0.6 * math.log(4) ** 2)
        assert collisions > threshold

    def test_flat_bucket_has_no_excess(self):
        collisions, threshold = bkr_statistic(SampleCounts([0, 0, 5, 5], 10), 1.0)
        assert collisions == 20.0
        assert threshold == pytest.approx(22.5 + 0.6 * math.log(4) ** 2)
        assert collisions <= threshold

    def test_constant_scales_slack(self):
        counts = SampleCounts([2, 0, 1, 1], 4)
        _, low = bkr_statistic(counts, 0.5, constant=0.1)
        _, high = bkr_statistic(counts, 0.5, constant=1.0)
        assert high - low == pytest.approx(0.9 * math.log(4) ** 2 / 0.5)

    def test_validation(self):
        with pytest.raises(ValidationError):
            bkr_statistic(SampleCounts([1, 1, 1, 1], 4, dims=(2, 2)), 0.1)
        with pytest.raises(ValidationError):
            bkr_statistic(SampleCounts([1, 1], 2), 0.0)


class TestExperimentConfig:
    """Sweep settings."""

    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.n == 50000 and cfg.eps == 0.05
        assert cfg.sample_grid == [10000, 20000, 30000]
        assert cfg.instance is Instance.UNIFORM_PERTURBED

    def test_strings_become_enums(self):
        cfg = ExperimentConfig(instance="zipf", tester="bkr")
        assert cfg.instance is Instance.ZIPF_PERTURBED
        assert cfg.tester is TesterKind.BKR

    @pytest.mark.parametrize(
        "overrides",
        [
            {"reps": 0},
            {"sample_grid": []},
            {"sample_grid": [300, 100]},
            {"sample_grid": [0]},
            {"eps": 1.0},
            {"instance": "gaussian"},
            {"tester": "collisions"},
            {"instance": "custom"},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ValidationError):
            ExperimentConfig(**overrides)

    def test_from_dict_unknown_key(self):
        with pytest.raises(ValidationError, match="Invalid experiment settings"):
            ExperimentConfig.from_dict({"trials": 3})

    def test_with_tester(self, small_cfg):
        bkr = with_tester(small_cfg, TesterKind.BKR)
        assert bkr.tester is TesterKind.BKR
        assert small_cfg.tester is TesterKind.CHISQ

    def test_with_tester_drops_out_path(self, small_cfg, tmp_path):
        small_cfg.out_path = tmp_path / "acc.csv"
        assert with_tester(small_cfg, TesterKind.BKR).out_path is None
        assert small_cfg.out_path == tmp_path / "acc.csv"


class TestInstances:
    """In-class and far instances."""

    def test_uniform_pair(self, small_cfg):
        p_in, p_far = build_instances(small_cfg)
        assert p_in.allclose(Pmf.uniform(200))
        assert tv_distance(p_in, p_far) == pytest.approx(small_cfg.far_constant * small_cfg.eps / 2)

    def test_far_instance_fixed_per_seed(self, small_cfg):
        _, a = build_instances(small_cfg)
        _, b = build_instances(small_cfg)
        assert a.allclose(b)

    def test_zipf_pair(self):
        cfg = ExperimentConfig(n=64, eps=0.05, instance="zipf", sample_grid=[100], reps=1)
        p_in, p_far = build_instances(cfg)
        assert is_member(ClassId.monotone(), p_in)
        assert dist_to_monotone(p_far) >= 0.05

    def test_custom_pair(self, tmp_path):
        (tmp_path / "in.txt").write_text("0.5\n0.5\n")
        (tmp_path / "far.txt").write_text("0.1\n0.9\n")
        cfg = ExperimentConfig(instance="custom", in_path=tmp_path / "in.txt", far_path=tmp_path / "far.txt")
        p_in, p_far = build_instances(cfg)
        assert p_in.n == 2
        assert p_far.mass.tolist() == pytest.approx([0.1, 0.9])

    def test_custom_size_mismatch(self, tmp_path):
        (tmp_path / "in.json").write_text(json.dumps({"mass": [0.5, 0.5]}))
        (tmp_path / "far.json").write_text(json.dumps({"mass": [0.2, 0.3, 0.5]}))
        cfg = ExperimentConfig(instance="custom", in_path=tmp_path / "in.json", far_path=tmp_path / "far.json")
        with pytest.raises(ValidationError, match="disagree"):
            build_instances(cfg)


class TestSweep:
    """Rows, reproducibility and CSV files."""

    def test_one_row_per_sample_size(self, small_cfg):
        rows = list(iter_rows(small_cfg))
        assert [r.m for r in rows] == [400, 800]
        for r in rows:
            assert 0.0 <= r.accept_in <= 1.0 and 0.0 <= r.reject_far <= 1.0
            assert r.accuracy == pytest.approx((r.accept_in + r.reject_far) / 2)
            assert r.tester == "chisq" and r.n == 200 and r.seed == 3

    def test_reproducible(self, small_cfg):
        assert _without_timing(experiment_accuracy(small_cfg)) == _without_timing(experiment_accuracy(small_cfg))

    def test_bkr_rows(self, small_cfg):
        rows = experiment_accuracy(with_tester(small_cfg, TesterKind.BKR))
        assert {r.tester for r in rows} == {"bkr"}

    def test_progress_callback(self, small_cfg):
        calls = []
        list(iter_rows(small_cfg, lambda: calls.append(1)))
        assert len(calls) == small_cfg.reps * len(small_cfg.sample_grid)

    def test_writes_csv(self, small_cfg, tmp_path):
        small_cfg.out_path = tmp_path / "runs" / "acc.csv"
        rows = experiment_accuracy(small_cfg)
        with small_cfg.out_path.open() as f:
            reader = csv.reader(f)
            assert tuple(next(reader)) == CSV_COLUMNS
            assert len(list(reader)) == len(rows)

    def test_read_csv(self, small_cfg, tmp_path):
        path = tmp_path / "acc.csv"
        write_csv(list(iter_rows(small_cfg)), path)
        rows = read_csv(path)
        assert [int(r["m"]) for r in rows] == [400, 800]

    def test_read_csv_rejects_other_files(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError, match="not an experiment CSV"):
            read_csv(path)
